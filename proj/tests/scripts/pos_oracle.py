#!/usr/bin/env python3
"""Independent counting oracle for the POS pipeline.

Recomputes prior accuracy and micro-averaged POS precision/recall/F1 directly
from the raw files, without going through the library code paths.

Usage: pos_oracle.py GOLD_CONLL PRIOR_HYPS_JSONL PREDICTIONS_JSONL
Prints a JSON object with prior_accuracy, precision, recall, f1.
"""

import json
import re
import sys


def read_conll(path):
    sentences = []
    current = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                if current:
                    sentences.append(current)
                current = []
                continue
            word, tag = line.split("\t")
            current.append((word, tag))
    if current:
        sentences.append(current)
    return sentences


def read_jsonl(path):
    records = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                record = json.loads(line)
                records[record["id"]] = record
    return records


def first_array(text):
    for start in (m.start() for m in re.finditer(r"\[", text)):
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            c = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
                continue
            if c == '"':
                in_string = True
            elif c in "[{":
                depth += 1
            elif c in "]}":
                depth -= 1
                if depth == 0:
                    try:
                        parsed = json.loads(text[start : i + 1])
                    except json.JSONDecodeError:
                        break
                    if isinstance(parsed, list):
                        return parsed
                    break
    return None


def main():
    gold_path, priors_path, pred_path = sys.argv[1:4]
    gold = read_conll(gold_path)
    priors = read_jsonl(priors_path)
    preds = read_jsonl(pred_path)

    prior_hits = 0
    for index, sentence in enumerate(gold):
        record = priors.get(f"s{index:04d}")
        first = record["text"].split()[0] if record and record["text"].split() else None
        if first is not None and sentence and first == sentence[0][1]:
            prior_hits += 1
    prior_accuracy = prior_hits / len(gold)

    correct = 0
    pred_total = 0
    gold_total = 0
    for index, sentence in enumerate(gold):
        gold_total += len(sentence)
        record = preds.get(f"s{index:04d}")
        array = first_array(record["hypothesis"]) if record else None
        pairs = []
        if array:
            for element in array:
                if isinstance(element, dict) and len(element) == 1:
                    ((word, tag),) = element.items()
                    if isinstance(tag, str):
                        pairs.append((word, tag))
        pred_total += len(pairs)
        for position, (word, tag) in enumerate(pairs):
            if position < len(sentence) and sentence[position] == (word, tag):
                correct += 1

    precision = correct / pred_total if pred_total else 0.0
    recall = correct / gold_total if gold_total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    print(
        json.dumps(
            {
                "prior_accuracy": prior_accuracy,
                "precision": precision,
                "recall": recall,
                "f1": f1,
            }
        )
    )


if __name__ == "__main__":
    main()
