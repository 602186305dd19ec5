#!/usr/bin/env python3
"""Regenerates corpus.jsonl: 200 hand-shaped completions over the bundled schemas."""
import json
import random
from pathlib import Path

rng = random.Random(20240611)

OPS = ["add", "subtract", "multiply"]
DISHES = ["stew", "curry", "salad", "soup", "pasta", "tofu", "chili", "rice", "bread", "pie"]
ITEMS = ["salt", "onion", "garlic", "tomato", "pepper", "oil", "flour", "egg", "milk", "basil"]
VERBS = ["chop", "boil", "fry", "stir", "bake", "mix", "serve", "grill", "simmer", "season"]
WORDS = ["alpha", "bravo", "delta", "echo", "gold", "kilo", "lima", "nova", "oscar", "tango"]


def truth_for(schema):
    if schema == "flat_qa":
        return {"reasoning": rng.choice(WORDS) + " " + rng.choice(WORDS), "answer": rng.choice(WORDS)}
    if schema == "math":
        a, b = rng.randint(0, 9), rng.randint(0, 9)
        op = rng.choice(OPS)
        ans = a + b if op == "add" else a - b if op == "subtract" else a * b
        return {"reasoning": {"operation": op, "left": a, "right": b}, "answer": ans}
    n = rng.randint(1, 3)
    return {
        "recipe": rng.choice(DISHES),
        "ingredients": [{"item": rng.choice(ITEMS), "amount": rng.randint(0, 9)} for _ in range(n)],
        "steps": [rng.choice(VERBS) for _ in range(rng.randint(1, 3))],
    }


def compact(v):
    return json.dumps(v, separators=(",", ":"), ensure_ascii=False)


def fence(body, tag="json"):
    return "```" + tag + "\n" + body + "\n```"


def drop_key(v):
    v = json.loads(json.dumps(v))
    k = rng.choice(list(v))
    del v[k]
    return v


def wrong_type(schema, v):
    v = json.loads(json.dumps(v))
    if schema == "math":
        v["answer"] = str(v["answer"])
    elif schema == "recipe":
        v["steps"] = "chop"
    else:
        v["answer"] = 7
    return v


def perturb_values(schema, v):
    v = json.loads(json.dumps(v))
    if schema == "math":
        v["answer"] = v["answer"] + 1
    elif schema == "recipe":
        v["recipe"] = rng.choice(DISHES)
        v["steps"] = v["steps"][:1]
    else:
        v["answer"] = "Alpha-Bravo " + v["answer"].upper()
    return v


VARIANTS = [
    lambda s, t: fence(compact(t)),
    lambda s, t: fence(compact(t), ""),
    lambda s, t: compact(t),
    lambda s, t: fence(json.dumps(t, indent=2), "JSON"),
    lambda s, t: fence(compact(t)[:-1]),
    lambda s, t: fence(compact(t)[:-1] + ",}"),
    lambda s, t: fence(compact(drop_key(t))),
    lambda s, t: fence(compact(wrong_type(s, t))),
    lambda s, t: fence(compact(dict(t, extra="note"))),
    lambda s, t: "Here is the JSON:\n" + fence(compact(t)) + "\nHope this helps.",
    lambda s, t: "The answer is " + compact(t),
    lambda s, t: fence('{"a":1,"a":2,' + compact(t)[1:]),
    lambda s, t: fence(compact(perturb_values(s, t))),
    lambda s, t: "",
    lambda s, t: "{}",
    lambda s, t: "```json\n" + compact(t),
    lambda s, t: "42",
    lambda s, t: fence(compact(t)).replace("\n", "\n  ", 1),
    lambda s, t: fence('{"note":"' + "x" * 520 + '",' + compact(t)[1:]),
    lambda s, t: fence(compact(t).replace(":", " : ")),
    lambda s, t: fence("[" + compact(t) + "]"),
    lambda s, t: "```python\n" + compact(t) + "\n```",
    lambda s, t: fence(compact({**t, "nested": {"deep": [1, 2.5, True, None]}})),
    lambda s, t: fence('{"café":"naïve \\u00e9t\\u00e9 \\"q\\"",' + compact(t)[1:]),
    lambda s, t: "```json {} ```",
]

SPECIAL = [
    ("math", fence('{"reasoning":{"operation":"divide","left":1,"right":2},"answer":1}'), None),
    ("math", fence('{"reasoning":{"operation":"add","left":1,"right":[2]},"answer":3}'), None),
    ("math", fence('{"reasoning":{"operation":"add","left":1},"answer":1}'), None),
    ("math", fence('{"reasoning":{"operation":"add","left":1.5,"right":2},"answer":3.5}'), None),
    ("math", fence('{"reasoning":{"operation":"add","left":1,"right":2},"answer":3.0}'), None),
    ("math", fence('{"reasoning":{"operation":"add","left":1,"right":2},"answer":-0}'), None),
    ("math", fence('{"reasoning":{"operation":"add","left":1e1,"right":2E0},"answer":12}'), None),
    ("recipe", fence('{"recipe":"stew","ingredients":[{"item":"salt","amount":1}],"steps":["chop","boil","fry","mix"]}'), None),
    ("recipe", fence('{"recipe":"stew","ingredients":[],"steps":["chop"]}'), None),
    ("recipe", fence('{"recipe":"stew","ingredients":[{"item":"salt"}],"steps":["chop"]}'), None),
    ("recipe", fence('{"recipe":"stew","ingredients":[{"item":"salt","amount":1,"brand":"x"}],"steps":["chop"]}'), None),
    ("recipe", fence('{"recipe":"stew","ingredients":[{"item":"salt","amount":1}],"steps":["chop","fly"]}'), None),
    ("flat_qa", fence('{"reasoning":null,"answer":"yes"}'), None),
    ("flat_qa", fence("{'reasoning':'a','answer':'b'}"), None),
    ("flat_qa", fence('{"reasoning":"a",/*c*/"answer":"b"}'), None),
    ("flat_qa", fence('{"reasoning":"tab\there","answer":"b"}'), None),
    ("flat_qa", fence('{"reasoning":"NaN","answer":NaN}'), None),
    ("flat_qa", fence('{"reasoning":"a","answer":"b"} trailing'), None),
    ("flat_qa", fence('{"reasoning":"\\x41","answer":"b"}'), None),
    ("flat_qa", fence('{"reasoning":"01","answer":01}'), None),
]


def main():
    rows = []
    schemas = ["flat_qa", "math", "recipe"]
    i = 0
    while len(rows) < 200 - len(SPECIAL):
        schema = schemas[i % 3]
        truth = truth_for(schema)
        variant = VARIANTS[i % len(VARIANTS)]
        row = {"schema": schema, "completion": variant(schema, truth)}
        if i % 11 != 5:
            row["ground_truth"] = truth
        rows.append(row)
        i += 1
    for schema, completion, truth in SPECIAL:
        row = {"schema": schema, "completion": completion}
        row["ground_truth"] = truth if truth is not None else {"reasoning": "a b", "answer": "b"}
        rows.append(row)
    out = Path(__file__).with_name("corpus.jsonl")
    with out.open("w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
