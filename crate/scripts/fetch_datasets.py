#!/usr/bin/env python3
"""Materialize the benchmark datasets as plain CSV files under data/.

Sources, tried in order for each dataset:
  * CSV copies shipped inside public packages (pip wheels / crates),
  * the UCI archive (needs network access).

Run from the repository root:  python3 scripts/fetch_datasets.py
"""
import glob
import gzip
import io
import os
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

import pandas as pd

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")

BOSTON_COLUMNS = [
    "CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE", "DIS",
    "RAD", "TAX", "PTRATIO", "B", "LSTAT", "MEDV",
]
ABALONE_COLUMNS = [
    "Sex", "Length", "Diameter", "Height", "WholeWeight",
    "ShuckedWeight", "VisceraWeight", "ShellWeight", "Rings",
]
UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"


def pip_wheel(package, tmp):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", package, "-d", tmp],
        check=True,
    )
    return zipfile.ZipFile(glob.glob(os.path.join(tmp, "*.whl"))[0])


def fetch_url(url):
    with urllib.request.urlopen(url, timeout=30) as r:
        return r.read()


def boston(tmp):
    z = pip_wheel("mlxtend", tmp)
    raw = z.read("mlxtend/data/data/boston_housing.csv").decode()
    df = pd.read_csv(io.StringIO(raw), header=None).iloc[:, : len(BOSTON_COLUMNS)]
    df.columns = BOSTON_COLUMNS
    return df


def california(tmp):
    z = pip_wheel("pytorch-widedeep", tmp)
    blob = z.read("pytorch_widedeep/datasets/data/california_housing.parquet.brotli")
    return pd.read_parquet(io.BytesIO(blob))


def wine(tmp):
    cargo_home = os.environ.get("CARGO_HOME", os.path.expanduser("~/.cargo"))
    hits = glob.glob(
        os.path.join(cargo_home, "registry/src/*/linfa-datasets-*/data/winequality-red.csv.gz")
    )
    if hits:
        return pd.read_csv(gzip.open(hits[0]))
    return pd.read_csv(io.BytesIO(fetch_url(f"{UCI}/wine-quality/winequality-red.csv")), sep=";")


def abalone(tmp):
    raw = fetch_url(f"{UCI}/abalone/abalone.data")
    return pd.read_csv(io.BytesIO(raw), header=None, names=ABALONE_COLUMNS)


def energy(tmp):
    raw = fetch_url(f"{UCI}/00242/ENB2012_data.xlsx")
    df = pd.read_excel(io.BytesIO(raw)).dropna(how="all")
    # Y1 = heating load, the usual regression target; Y2 is dropped.
    return df.drop(columns=["Y2"])


def main():
    os.makedirs(OUT, exist_ok=True)
    jobs = {
        "boston.csv": boston,
        "california.csv": california,
        "winequality-red.csv": wine,
        "abalone.csv": abalone,
        "energy.csv": energy,
    }
    failed = []
    for name, job in jobs.items():
        path = os.path.join(OUT, name)
        if os.path.exists(path):
            print(f"{name}: present")
            continue
        try:
            with tempfile.TemporaryDirectory() as tmp:
                df = job(tmp)
            df.to_csv(path, index=False)
            print(f"{name}: {df.shape[0]} rows x {df.shape[1]} columns")
        except Exception as exc:  # noqa: BLE001
            failed.append(name)
            print(f"{name}: unavailable ({exc})", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
