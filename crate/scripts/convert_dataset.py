#!/usr/bin/env python3
"""Convert a mined commit dataset into vulnlex JSONL.

The input is a JSON file of security-fix commits nested as
repository -> commit -> "files" -> path -> {"source", "changes"}, where each
change lists the removed lines under "badparts". Any nesting depth is
accepted; every object holding both "source" and "changes" is treated as a
file record.

Each top-level function or class of the pre-fix source becomes one sample.
A sample is labeled 1 when it contains a removed line, 0 otherwise.

    python3 scripts/convert_dataset.py plain_sql sql_injection > sql.jsonl
    python3 scripts/convert_dataset.py plain_xss xss --origin mined >> all.jsonl
"""
import argparse
import ast
import hashlib
import json
import sys

CLASSES = (
    "sql_injection",
    "xss",
    "command_injection",
    "xsrf",
    "remote_code_execution",
    "path_disclosure",
    "open_redirect",
)


def file_records(node, trail=()):
    if isinstance(node, dict):
        if "source" in node and "changes" in node:
            yield "/".join(trail), node
            return
        for key in sorted(node):
            yield from file_records(node[key], trail + (str(key),))
    elif isinstance(node, list):
        for i, item in enumerate(node):
            yield from file_records(item, trail + (str(i),))


def chunks(source):
    """Top-level definitions as source strings; the whole file if it does
    not parse or defines nothing."""
    try:
        tree = ast.parse(source)
    except (SyntaxError, ValueError):
        return [source]
    lines = source.splitlines(keepends=True)
    out = []
    for node in tree.body:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            start = min([node.lineno] + [d.lineno for d in node.decorator_list]) - 1
            out.append("".join(lines[start : node.end_lineno]))
    return out or [source]


def removed_lines(record):
    for change in record.get("changes") or []:
        for part in change.get("badparts") or []:
            part = part.strip()
            if part:
                yield part


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("input", help="mined dataset (JSON)")
    parser.add_argument("vuln_class", choices=CLASSES)
    parser.add_argument("--origin", help="value for the optional origin field")
    parser.add_argument("--min-lines", type=int, default=2, help="drop shorter samples")
    args = parser.parse_args()

    with open(args.input, encoding="utf-8") as fh:
        data = json.load(fh)

    seen = set()
    counts = [0, 0]
    for trail, record in file_records(data):
        source = record.get("source")
        if not isinstance(source, str):
            continue
        bad = set(removed_lines(record))
        for index, code in enumerate(chunks(source)):
            code = code.replace("\r\n", "\n")
            if len(code.strip().splitlines()) < args.min_lines:
                continue
            digest = hashlib.sha256(code.encode("utf-8")).hexdigest()
            if digest in seen:
                continue
            seen.add(digest)
            label = int(any(line.strip() in bad for line in code.splitlines()))
            counts[label] += 1
            sample = {
                "id": f"{args.vuln_class}-{digest[:16]}",
                "code": code,
                "label": label,
                "vuln_class": args.vuln_class,
            }
            if args.origin:
                sample["origin"] = args.origin
            sys.stdout.write(json.dumps(sample, ensure_ascii=False) + "\n")
    print(f"{counts[1]} vulnerable, {counts[0]} clean", file=sys.stderr)


if __name__ == "__main__":
    main()
