"""Deterministic 200-tick corpus exercising every cleaning rule.

Every violator breaks exactly one rule while keeping all other fields
normal, so its fate is known by construction:

* indices 0, 1, 2 and 198, 199 sit outside the 9:30-16:00 session;
* three interior ticks carry a zero price;
* six report exchange 'Q' instead of 'N';
* four carry a non-zero correction indicator;
* five carry an abnormal sale condition letter;
* three are price spikes against the flat 100.0 tape, so the rolling
  median sees a deviation with (near-)zero mean absolute deviation;
* four carry a non-empty suffix.

Everything else is a flat-price tick and must survive: the expected
retained set is exactly the complement of the 30 violators, in input
order.
"""

SESSION_START = 34300.0
STEP = 1.5

RULE1_EARLY = {0: 0.0, 1: 30000.5, 2: 34199.99}
RULE1_LATE = {198: 57600.01, 199: 60000.0}
RULE2_ZERO_PRICE = (25, 75, 140)
RULE3_EXCHANGE = (30, 55, 85, 115, 145, 175)
RULE4_CORRECTION = {35: 1, 95: 2, 125: 1, 155: 12}
RULE5_CONDITION = {40: "Z", 70: "O", 100: "L", 135: "X", 185: "T"}
RULE6_SPIKES = {60: 150.0, 110: 50.0, 165: 130.0}
RULE7_SUFFIX = {45: "PR", 80: "WS", 105: "A", 190: "B"}

N_TICKS = 200

EXPECTED_STEP_DROPS = (5, 3, 6, 4, 5, 3, 4)
EXPECTED_RETAINED = N_TICKS - sum(EXPECTED_STEP_DROPS)

_NORMAL_CONDITIONS = ("E", "F", "I", "")


def violator_indices():
    out = set(RULE1_EARLY) | set(RULE1_LATE)
    out |= set(RULE2_ZERO_PRICE) | set(RULE3_EXCHANGE) | set(RULE4_CORRECTION)
    out |= set(RULE5_CONDITION) | set(RULE6_SPIKES) | set(RULE7_SUFFIX)
    return out


def build_rows():
    """Rows as (timestamp, price, exchange, correction, condition, suffix)."""
    rows = []
    for i in range(N_TICKS):
        ts = SESSION_START + i * STEP
        price = 100.0
        exchange = "N"
        correction = 0
        condition = _NORMAL_CONDITIONS[i % 4]
        suffix = ""
        if i in RULE1_EARLY:
            ts = RULE1_EARLY[i]
        elif i in RULE1_LATE:
            ts = RULE1_LATE[i]
        elif i in RULE2_ZERO_PRICE:
            price = 0.0
        elif i in RULE3_EXCHANGE:
            exchange = "Q"
        elif i in RULE4_CORRECTION:
            correction = RULE4_CORRECTION[i]
        elif i in RULE5_CONDITION:
            condition = RULE5_CONDITION[i]
        elif i in RULE6_SPIKES:
            price = RULE6_SPIKES[i]
        elif i in RULE7_SUFFIX:
            suffix = RULE7_SUFFIX[i]
        rows.append((ts, price, exchange, correction, condition, suffix))
    return rows


def expected_retained_timestamps():
    bad = violator_indices()
    return [row[0] for i, row in enumerate(build_rows()) if i not in bad]


def write_csv(path):
    lines = ["timestamp,price,exchange,correction,sale_condition,suffix"]
    for ts, price, exchange, correction, condition, suffix in build_rows():
        lines.append(f"{ts!r},{price!r},{exchange},{correction},{condition},{suffix}")
    path.write_text("\n".join(lines) + "\n")
    return path
