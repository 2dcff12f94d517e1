"""Recomputes pass@k and mean DIR from raw counts.

Input (stdin): {"n": int, "ks": [int], "samples": [{"correct": int, "dirs": [[hits, total] | null]}]}
Output: one line per metric, "name hexbits", hexbits being the IEEE-754 big-endian encoding.
"""
import json
import struct
import sys


def bits(x):
    return struct.pack(">d", x).hex()


def pass_at_k(n, c, k):
    if n - c < k:
        return 1.0
    miss = 1.0
    for i in range(n - c + 1, n + 1):
        miss *= 1.0 - k / i
    return 1.0 - miss


data = json.load(sys.stdin)
n = data["n"]
for k in data["ks"]:
    total = 0.0
    for s in data["samples"]:
        total += pass_at_k(n, s["correct"], k)
    print(f"pass@{k} {bits(total / len(data['samples']))}")

means = []
for s in data["samples"]:
    vals = [h / t for h, t in (d for d in s["dirs"] if d is not None)]
    if vals:
        acc = 0.0
        for v in vals:
            acc += v
        means.append(acc / len(vals))
acc = 0.0
for m in means:
    acc += m
print(f"dir {bits(acc / len(means))}")
