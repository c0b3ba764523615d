#!/usr/bin/env python3
"""Write the bundled synthetic pledge corpus as raw CSV plus gazetteer,
ready for `cm import`."""
import argparse
import csv
from pathlib import Path

from cminer.datasets import make_study_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=3)
    parser.add_argument("--pledges", type=int, default=60)
    parser.add_argument("--out-dir", required=True)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    docs, gazetteer = make_study_corpus(n_pledges=args.pledges, seed=args.seed)

    with open(out / "raw.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["country", "group", "date", "text"])
        for doc in docs:
            writer.writerow([doc.metadata.get("country", ""),
                             doc.metadata.get("group", ""),
                             doc.date.isoformat() if doc.date else "",
                             doc.body])

    with open(out / "countries.tsv", "w", encoding="utf-8") as fh:
        for surface in sorted(gazetteer):
            fh.write(f"{surface}\t{gazetteer[surface]}\n")

    print(f"wrote {len(docs)} documents to {out / 'raw.csv'}")


if __name__ == "__main__":
    main()
