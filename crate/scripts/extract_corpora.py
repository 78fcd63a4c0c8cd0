"""Extract the bundled grade-4 corpora and the published stepwise table from a
LaTeX-flavoured source text into data/ and fixtures/.

Usage: python3 scripts/extract_corpora.py SOURCE"""
import json
import re
import sys

src = open(sys.argv[1], encoding="utf-8").read()


def items(section_title):
    start = src.index(section_title)
    body = src[start:src.index("\\end{enumerate}", start)]
    out = []
    for chunk in re.split(r"\\item\s*", body)[1:]:
        m = re.search(r'"(.*)"', chunk, re.S)
        out.append(re.sub(r"\s+", " ", m.group(1)).strip())
    return out


rows = []
for line in src.splitlines():
    m = re.match(
        r"\s*(4\.[A-Z]+\.[A-Z0-9.]+)\s*&\s*(\d+)\s*&\s*&\s*(\d+)\s*&\s*(\d+)\s*&\s*(\d+)"
        r"\s*&\s*&\s*([\d.]+)\s*&\s*([\d.]+)\s*&\s*([\d.]+)\s*&\s*&\s*([\d.]+)",
        line,
    )
    if m:
        rows.append(m.groups())

ccss = items("Modified Common Core State Standards")
naep = items("Modified NAEP Item Specifications")
assert len(ccss) == 34 and len(naep) == 49 and len(rows) == 34

ccss_domains = [1] * 5 + [2] * 6 + [3] * 13 + [4] * 7 + [5] * 3
naep_domains = [1] * 18 + [2] * 9 + [3] * 9 + [4] * 4 + [5] * 9

standards = {
    "side": "standard",
    "domains": [
        {"id": 1, "name": "Operations and Algebraic Thinking"},
        {"id": 2, "name": "Number and Operations in Base Ten"},
        {"id": 3, "name": "Number and Operations\u2014Fractions"},
        {"id": 4, "name": "Measurement and Data"},
        {"id": 5, "name": "Geometry"},
    ],
    "statements": [
        {"id": r[0], "ref": i + 1, "domain": d, "text": t}
        for i, (r, d, t) in enumerate(zip(rows, ccss_domains, ccss))
    ],
}
specifications = {
    "side": "specification",
    "domains": [
        {"id": 1, "name": "Number Sense, Properties, and Operations"},
        {"id": 2, "name": "Measurement"},
        {"id": 3, "name": "Geometry"},
        {"id": 4, "name": "Data Analysis, Statistics, and Probability"},
        {"id": 5, "name": "Algebra and Functions"},
    ],
    "statements": [
        {"id": f"NAEP-{i + 1}", "ref": i + 1, "domain": d, "text": t}
        for i, (d, t) in enumerate(zip(naep_domains, naep))
    ],
}
with open("data/ccss_g4_math.json", "w", encoding="utf-8") as f:
    json.dump(standards, f, indent=2, ensure_ascii=False)
    f.write("\n")
with open("data/naep_g4_math.json", "w", encoding="utf-8") as f:
    json.dump(specifications, f, indent=2, ensure_ascii=False)
    f.write("\n")
with open("fixtures/table1_published.csv", "w") as f:
    f.write("ref,spec1,spec2,spec3,r2_1,r2_2,r2_3,increase\n")
    for r in rows:
        f.write(",".join(r[1:]) + "\n")
