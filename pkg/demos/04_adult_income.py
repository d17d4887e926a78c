"""Effect of a bachelor's degree on earning at least $50K in the UCI Adult data.

Download adult.data from the UCI repository, then run:
    python3 demos/04_adult_income.py /path/to/adult.data
The file needs no header row; one is added on the fly.
"""

import json
import sys
import tempfile
from pathlib import Path

from dpwate import Schema, dp_wate, load_csv, nonprivate_wate

COLUMNS = ("age,workclass,fnlwgt,education,education-num,marital-status,occupation,relationship,"
           "race,sex,capital-gain,capital-loss,hours-per-week,native-country,income")

src = Path(sys.argv[1])
text = src.read_text(encoding="utf-8")
if not text.lstrip().lower().startswith("age"):
    src = Path(tempfile.mkdtemp()) / "adult.csv"
    src.write_text(COLUMNS + "\n" + text, encoding="utf-8")

schema = Schema.from_dict(json.loads((Path(__file__).parent / "adult_schema.json").read_text()))
data = load_csv(src, schema)
print(f"complete records: {data.n} (dropped {data.dropped_rows}); covariate columns: {data.p}")

results = dp_wate(data, ["ATE", "ATT", "ATC"], M=100, a=0.05, epsilon=1.0, pi=0.5, seed=2024)
for est, res in results.items():
    np_est = nonprivate_wate(data, est)
    lo, hi = np_est.confidence_interval()
    s = res.summary
    print(f"{est.value}: private {s.point:.3f} ({s.lower:.3f}, {s.upper:.3f})   "
          f"non-private {np_est.tau_hat:.3f} ({lo:.3f}, {hi:.3f})")
