#!/usr/bin/env python3
"""Extract documented Java methods from a source tree into CodeSearchNet-style JSONL.

Usage: make_java_fixture.py <source-root> <repo-name> <output.jsonl> [--limit N]

Each output line carries repo, path, func_name, language, code and docstring.
The docstring is the first sentence of the method's Javadoc with tags removed.
"""
import argparse
import json
import os
import re
import sys

SIG = re.compile(
    r"^[ \t]*((?:@\w+(?:\([^)]*\))?\s+)*)"
    r"((?:public|protected|private|static|final|synchronized|abstract|native|default)\s+)*"
    r"(?:<[^>{;]*>\s+)?"
    r"[\w.<>\[\], ?]+\s+(\w+)\s*\(",
    re.M,
)


KEYWORDS = {"if", "for", "while", "switch", "catch", "synchronized", "return", "new", "try", "do", "else"}


def skip_literal(src, i):
    """Return the index just past a string/char literal or comment starting at i, or None."""
    c = src[i]
    if src.startswith("//", i):
        j = src.find("\n", i)
        return len(src) if j < 0 else j
    if src.startswith("/*", i):
        j = src.find("*/", i + 2)
        return None if j < 0 else j + 2
    if c in "\"'":
        j = i + 1
        while j < len(src):
            if src[j] == "\\":
                j += 2
                continue
            if src[j] == c:
                return j + 1
            if src[j] == "\n":
                return None
            j += 1
        return None
    return i


def match_body(src, open_brace):
    depth = 0
    i = open_brace
    while i < len(src):
        j = skip_literal(src, i)
        if j is None:
            return None
        if j != i:
            i = j
            continue
        if src[i] == "{":
            depth += 1
        elif src[i] == "}":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return None


def first_sentence(javadoc):
    body = javadoc[3:-2]
    lines = [re.sub(r"^\s*\*\s?", "", l) for l in body.splitlines()]
    text = []
    for l in lines:
        if l.strip().startswith("@"):
            break
        text.append(l.strip())
    s = " ".join(t for t in text if t)
    s = re.sub(r"<[^>]+>", "", s)
    s = re.sub(r"\{@\w+\s+([^}]*)\}", r"\1", s)
    s = re.sub(r"\s+", " ", s).strip()
    m = re.match(r"(.+?\.)(\s|$)", s)
    return m.group(1) if m else s


def extract(path, rel, repo):
    with open(path, encoding="utf-8", errors="strict") as f:
        src = f.read()
    out = []
    for doc in re.finditer(r"/\*\*(?:(?!\*/).)*\*/", src, re.S):
        rest = src[doc.end():]
        m = SIG.match(rest.lstrip("\n"))
        if not m:
            continue
        offset = doc.end() + (len(rest) - len(rest.lstrip("\n")))
        start = offset + m.start()
        paren_end = src.find(")", offset + m.end())
        brace = src.find("{", offset + m.end())
        semi = src.find(";", offset + m.end())
        if brace < 0 or paren_end < 0 or (0 <= semi < brace):
            continue
        end = match_body(src, brace)
        if end is None:
            continue
        code = src[start:end]
        lines = code.splitlines()
        indent = len(lines[0]) - len(lines[0].lstrip())
        code = "\n".join(l[indent:] if l[:indent].isspace() else l for l in lines).strip()
        doc_s = first_sentence(doc.group(0))
        if m.group(3) in KEYWORDS or len(doc_s.split()) < 3 or ";" not in code:
            continue
        out.append({"repo": repo, "path": rel, "func_name": m.group(3),
                    "language": "java", "code": code, "docstring": doc_s})
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("root")
    ap.add_argument("repo")
    ap.add_argument("output")
    ap.add_argument("--limit", type=int, default=0)
    args = ap.parse_args()
    samples = []
    for dirpath, _, files in sorted(os.walk(args.root)):
        for name in sorted(files):
            if name.endswith(".java"):
                full = os.path.join(dirpath, name)
                samples.extend(extract(full, os.path.relpath(full, args.root), args.repo))
    if args.limit:
        samples = samples[: args.limit]
    with open(args.output, "w", encoding="utf-8") as f:
        for s in samples:
            f.write(json.dumps(s, ensure_ascii=False) + "\n")
    print(f"{len(samples)} samples", file=sys.stderr)


if __name__ == "__main__":
    main()
