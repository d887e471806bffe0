#!/usr/bin/env python3
"""Convert a pickled averaged-perceptron POS model into the qabench binary format.

The input pickle is the (weights, tagdict, classes) triple written by the
textblob-aptagger / NLTK PerceptronTagger trainers (features must match the
ones computed in src/tagger.cpp). Weights are stored as signed milli-units,
which is exact for models averaged with round(w, 3).

Usage: export_perceptron_weights.py MODEL.pickle OUT.bin
"""
import pickle
import struct
import sys
import zlib

MAGIC = b"QBPTAG\x00\x00"
FORMAT_VERSION = 1


def main(argv):
    if len(argv) != 3:
        sys.stderr.write(__doc__)
        return 2
    with open(argv[1], "rb") as f:
        weights, tagdict, classes = pickle.load(f, encoding="latin1")

    classes = sorted(classes)
    index = {c: i for i, c in enumerate(classes)}
    out = bytearray(MAGIC)
    out += struct.pack("<I", FORMAT_VERSION)

    out += struct.pack("<I", len(classes))
    for c in classes:
        b = c.encode("utf-8")
        out += struct.pack("<B", len(b)) + b

    out += struct.pack("<I", len(tagdict))
    for word in sorted(tagdict):
        b = word.encode("utf-8")
        out += struct.pack("<H", len(b)) + b + struct.pack("<B", index[tagdict[word]])

    feats = sorted((k, v) for k, v in weights.items() if v)
    out += struct.pack("<I", len(feats))
    for feat, per_class in feats:
        b = feat.encode("utf-8")
        out += struct.pack("<H", len(b)) + b
        items = sorted((index[c], int(round(w * 1000))) for c, w in per_class.items())
        items = [(c, w) for c, w in items if w != 0]
        out += struct.pack("<B", len(items))
        for c, w in items:
            out += struct.pack("<Bi", c, w)

    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    with open(argv[2], "wb") as f:
        f.write(out)
    print(f"{len(classes)} classes, {len(tagdict)} tagdict entries, {len(feats)} features -> {argv[2]}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
