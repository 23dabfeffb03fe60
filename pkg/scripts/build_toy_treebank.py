"""Write the small synthetic Penn-style treebank bundled with the package.

Trees come from a hand-written recursive grammar with a fixed seed. Some
nodes carry function tags and -NONE- traces so the reader's normalization
is exercised.
"""

import random
import sys

RULES = {
    "S": [(["NP-SBJ", "VP"], 6), (["NP-SBJ", "VP", "PP-TMP"], 1), (["S", "CC", "S"], 1)],
    "NP-SBJ": [(["DT", "NN"], 4), (["NNP"], 2), (["PRP"], 2), (["NP", "PP"], 1)],
    "NP": [(["DT", "NN"], 5), (["DT", "JJ", "NN"], 2), (["NNP"], 2), (["NP", "PP"], 1), (["NNS"], 2)],
    "VP": [(["VBD", "NP"], 5), (["VBD"], 2), (["VBD", "NP", "PP"], 2), (["VBD", "SBAR"], 1), (["MD", "VP"], 1)],
    "SBAR": [(["IN", "S"], 1)],
    "PP": [(["IN", "NP"], 1)],
    "PP-TMP": [(["IN", "NP"], 1)],
    "DT": [(["the"], 4), (["a"], 3), (["every"], 1)],
    "NN": [(["dog"], 3), (["cat"], 3), (["park"], 2), (["telescope"], 1), (["man"], 2), (["morning"], 1), (["comet"], 0.2)],
    "NNS": [(["dogs"], 2), (["stars"], 1), (["ideas"], 1)],
    "JJ": [(["old"], 2), (["small"], 2), (["green"], 1), (["quiet"], 0.2)],
    "NNP": [(["alice"], 2), (["bob"], 2), (["paris"], 1), (["oslo"], 0.2)],
    "PRP": [(["she"], 1), (["he"], 1), (["they"], 1)],
    "VBD": [(["saw"], 3), (["liked"], 2), (["slept"], 1), (["said"], 1), (["whistled"], 0.2)],
    "MD": [(["would"], 1), (["could"], 1)],
    "IN": [(["in"], 2), (["with"], 2), (["that"], 1), (["near"], 1)],
    "CC": [(["and"], 2), (["but"], 1)],
}


def expand(sym, rng, depth):
    if sym not in RULES:
        return sym
    opts = RULES[sym]
    if depth > 6:
        opts = [opts[0]]
    rhs = rng.choices([r for r, _ in opts], weights=[w for _, w in opts])[0]
    kids = [expand(s, rng, depth + 1) for s in rhs]
    if sym == "NP-SBJ" and rng.random() < 0.15:
        kids.insert(0, "(-NONE- *T*-1)")
    return f"({sym} {' '.join(kids)})"


def main(path, n=60, seed=7):
    rng = random.Random(seed)
    with open(path, "w", encoding="utf-8") as f:
        for _ in range(n):
            f.write(f"( {expand('S', rng, 0)} )\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/langscale/data/toy_treebank.mrg")
