"""Generate the checked-in numeric test fixtures.

* fixtures/ccss_unit_test_8x5.csv: five seeded pseudorandom unit vectors of length 8.
* fixtures/simcheck.csv + simcheck_reference.txt: a vector pair and its cosine and
  Pearson correlation computed by direct summation at 50 significant digits.
* fixtures/synthetic_{ccss,naep}_256.csv: planted-structure embeddings for the
  34 standards and 49 specifications used by the end-to-end smoke tests. Each
  standard is a noisy mixture of the three specifications its published
  stepwise row lists, so downstream stages have a known answer to find. These
  are synthetic, not service output.
"""
import csv

import mpmath
import numpy as np

mpmath.mp.dps = 50


def write_matrix(path, mat):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        for row in mat:
            w.writerow([repr(float(v)) for v in row])


def unit_columns(rng, n, m):
    x = rng.standard_normal((n, m))
    return x / np.linalg.norm(x, axis=0)


rng = np.random.default_rng(20240815)
write_matrix("fixtures/ccss_unit_test_8x5.csv", unit_columns(rng, 8, 5))

# simcheck: two non-centred vectors with distinct scales
u = rng.standard_normal(64) * 0.3 + 0.05
v = 0.6 * u + rng.standard_normal(64) * 0.2 - 0.02
write_matrix("fixtures/simcheck.csv", np.column_stack([u, v]))
# re-read exactly what was written so the reference matches the file contents
pairs = [tuple(mpmath.mpf(c) for c in line.strip().split(",")) for line in open("fixtures/simcheck.csv")]
us = [p[0] for p in pairs]
vs = [p[1] for p in pairs]
n = len(us)
dot = mpmath.fsum(a * b for a, b in zip(us, vs))
cos = dot / (mpmath.sqrt(mpmath.fsum(a * a for a in us)) * mpmath.sqrt(mpmath.fsum(b * b for b in vs)))
mu = mpmath.fsum(us) / n
mv = mpmath.fsum(vs) / n
cu = [a - mu for a in us]
cv = [b - mv for b in vs]
pear = mpmath.fsum(a * b for a, b in zip(cu, cv)) / (
    mpmath.sqrt(mpmath.fsum(a * a for a in cu)) * mpmath.sqrt(mpmath.fsum(b * b for b in cv))
)
with open("fixtures/simcheck_reference.txt", "w") as f:
    f.write(f"cosine {mpmath.nstr(cos, 30)}\n")
    f.write(f"pearson {mpmath.nstr(pear, 30)}\n")

# synthetic study-shaped embeddings
table = [line.strip().split(",") for line in open("fixtures/table1_published.csv")][1:]
dims = 256
specs = unit_columns(rng, dims, 49)
stds = np.zeros((dims, 34))
for i, row in enumerate(table):
    s1, s2, s3 = (int(c) - 1 for c in row[1:4])
    noise = rng.standard_normal(dims)
    noise /= np.linalg.norm(noise)
    y = 0.62 * specs[:, s1] + 0.40 * specs[:, s2] + 0.28 * specs[:, s3] + 0.55 * noise
    stds[:, i] = y / np.linalg.norm(y)
write_matrix("fixtures/synthetic_ccss_256.csv", stds)
write_matrix("fixtures/synthetic_naep_256.csv", specs)
