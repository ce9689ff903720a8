#!/usr/bin/env python3
"""Emit the normalized token stream of a Python file using the standard
library tokenizer, as `kind<TAB>lexeme` lines.

Used to freeze the lexer's expected outputs for the fixture corpus:

    python3 scripts/reference_tokens.py FILE.py > FILE.tokens
"""
import keyword
import sys
import tokenize

PUNCTUATION = {"(", ")", "[", "]", "{", "}", ",", ":", ";", ".", "..."}


def normalized(path):
    with open(path, "rb") as fh:
        for tok in tokenize.tokenize(fh.readline):
            kind, text = tok.type, tok.string
            if kind == tokenize.NAME:
                yield ("keyword" if keyword.iskeyword(text) else "identifier", text)
            elif kind == tokenize.NUMBER:
                yield ("number", "<num>")
            elif kind == tokenize.STRING:
                yield ("string", "<str>")
            elif kind == tokenize.OP:
                yield ("punctuation" if text in PUNCTUATION else "operator", text)
            elif kind == tokenize.NEWLINE:
                yield ("newline", "<nl>")
            elif kind == tokenize.INDENT:
                yield ("indent", "<ind>")
            elif kind == tokenize.DEDENT:
                yield ("dedent", "<ded>")
            # NL, COMMENT, ENCODING and ENDMARKER carry no tokens.


if __name__ == "__main__":
    for kind, lexeme in normalized(sys.argv[1]):
        print(f"{kind}\t{lexeme}")
