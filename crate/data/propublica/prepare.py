"""Filter the raw ProPublica COMPAS export down to the modelling columns.

    python prepare.py propublica-recidivism.csv propublica.csv
"""
import sys

import pandas as pd

KEEP = [
    "sex", "age", "age_cat", "race", "juv_fel_count", "juv_misd_count",
    "juv_other_count", "priors_count", "c_charge_degree", "c_charge_desc",
    "two_year_recid",
]


def main(src, dst):
    df = pd.read_csv(src)
    df = df[
        df.days_b_screening_arrest.between(-30, 30)
        & (df.is_recid != -1)
        & (df.c_charge_degree != "O")
        & (df.score_text != "N/A")
    ]
    df[KEEP].to_csv(dst, index=False)


if __name__ == "__main__":
    main(*sys.argv[1:3])
