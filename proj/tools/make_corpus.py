#!/usr/bin/env python3
"""Write the desk-scale binary classification corpus used by the evaluation
harness and the acceptance suite into data/corpus/.

Sources are bundled with scikit-learn, statsmodels and pydataset, so no
network access is needed once those packages are installed.
"""
import argparse
import pathlib

import pandas as pd


def sklearn_frame(loader, target_map):
    bunch = loader()
    frame = pd.DataFrame(bunch.data, columns=[str(c) for c in bunch.feature_names])
    frame["label"] = [target_map(t) for t in bunch.target]
    return frame


def build():
    from pydataset import data as rdata
    from sklearn import datasets as skd
    import statsmodels.api as sm

    out = {}

    out["breast_cancer"] = sklearn_frame(
        skd.load_breast_cancer, lambda t: "malignant" if t == 0 else "benign")
    out["wine_class0"] = sklearn_frame(
        skd.load_wine, lambda t: "class0" if t == 0 else "other")

    pima = pd.concat([rdata("Pima.tr"), rdata("Pima.te")], ignore_index=True)
    pima = pima.rename(columns={"type": "label"})
    out["pima"] = pima

    biopsy = rdata("biopsy").dropna().drop(columns=["ID"])
    out["biopsy"] = biopsy.rename(columns={"class": "label"})

    part = rdata("Participation").copy()
    part["foreign"] = (part["foreign"] == "yes").astype(int)
    label = part.pop("lfp")
    part["label"] = label
    out["participation"] = part

    birth = rdata("birthwt").drop(columns=["bwt"])
    label = birth.pop("low").map({0: "normal", 1: "low"})
    birth["label"] = label
    out["birthwt"] = birth

    crabs = rdata("crabs")[["FL", "RW", "CL", "CW", "BD", "sp"]]
    out["crabs"] = crabs.rename(columns={"sp": "label"})

    anes = sm.datasets.anes96.load_pandas().data.drop(columns=["logpopul"])
    label = anes.pop("vote").map({0.0: "clinton", 1.0: "dole"})
    anes["label"] = label
    out["anes96"] = anes
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parents[1] / "data" / "corpus"))
    args = parser.parse_args()
    target = pathlib.Path(args.out)
    target.mkdir(parents=True, exist_ok=True)
    for name, frame in build().items():
        frame = frame.reset_index(drop=True)
        frame.columns = [str(c).replace(" ", "_").replace(",", "_") for c in frame.columns]
        frame.to_csv(target / f"{name}.csv", index=False)
        print(f"{name}: n={len(frame)} p={frame.shape[1] - 1} classes={frame['label'].value_counts().to_dict()}")


if __name__ == "__main__":
    main()
