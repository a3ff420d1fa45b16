#!/usr/bin/env python3
"""Counts program-graph nodes and edges straight from the fixture text.

Shares no code with the Rust builder: operands are found with regular
expressions over the restricted syntax used by the fixtures. Output is
fixtures/graph_stats.golden.json, mapping each .ll path (relative to
fixtures/) to [control, variable, constant, control_edges, data_edges,
call_edges].
"""

import json
import re
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures"



def strip(line):
    line = line.split(";")[0]
    line = re.sub(r",?\s*![\w.]+\s+!\d+", "", line)  # metadata attachments
    line = re.sub(r"#\d+", "", line)
    return line.strip()


def functions(text):
    """Yields (name, params, blocks) with blocks as lists of instruction strings."""
    lines = [strip(l) for l in text.splitlines()]
    i = 0
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line.startswith("define"):
            continue
        name = re.search(r"@([\w.]+)\(", line).group(1)
        params = re.findall(r"%[\w.]+", line[line.index("("):line.rindex(")")])
        blocks, cur = [], None
        pending = ""
        while True:
            line = lines[i]
            i += 1
            if line == "}":
                break
            if not line:
                continue
            if re.fullmatch(r"[\w.]+:", line):
                cur = []
                blocks.append(cur)
                continue
            if cur is None:
                cur = []
                blocks.append(cur)
            pending = (pending + " " + line).strip()
            if pending.count("[") > pending.count("]"):
                continue
            cur.append(pending)
            pending = ""
        yield name, params, blocks


def operands(ins):
    """Non-label operand texts, in order."""
    body = re.sub(r"^%[\w.]+\s*=\s*", "", ins)
    body = re.sub(r",\s*align \d+", "", body)
    body = re.sub(r"\[\d+ x \w+\]", "", body)
    op = body.split()[0]
    if op == "phi":
        pairs = re.findall(r"\[\s*([^,\]]+),\s*%[\w.]+\s*\]", body)
        return [p.strip() for p in pairs]
    body = re.sub(r"label %[\w.]+", "", body)
    found = []
    for m in re.finditer(r"[%@][\w.]+|(?<![\w.%@\-])-?\d+(?![\w.])|\bnull\b", body):
        found.append(m.group(0))
    return found


def labels(ins):
    return re.findall(r"label %([\w.]+)", ins)


def stats(text):
    funcs = list(functions(text))
    rets = {name: sum(1 for b in blocks for ins in b if ins.split()[0] == "ret") for name, _, blocks in funcs}
    control = variable = constant = cedges = dedges = calls = 0
    for name, params, blocks in funcs:
        variable += len(params)
        consts = set()
        for b in blocks:
            control += len(b)
            cedges += len(b) - 1
            cedges += len(labels(b[-1]))
            for ins in b:
                ops = operands(ins)
                dedges += len(ops)
                consts.update(o for o in ops if not o.startswith("%"))
                if re.match(r"%[\w.]+\s*=", ins):
                    variable += 1
                    dedges += 1
                m = re.search(r"\bcall\b[^@]*@([\w.]+)\(", ins)
                if m and m.group(1) in rets:
                    calls += 1 + rets[m.group(1)]
        constant += len(consts)
    return [control, variable, constant, cedges, dedges, calls]


def main():
    out = {}
    for path in sorted(ROOT.rglob("*.ll")):
        out[path.relative_to(ROOT).as_posix()] = stats(path.read_text())
    (ROOT / "graph_stats.golden.json").write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
