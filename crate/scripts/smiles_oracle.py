"""Regenerate the SMILES reference corpus used by the parser tests.

Picks molecules from the RDKit-bundled NCI and ChEMBL sample sets, keeps
those inside the supported grammar subset, and records counts computed by
RDKit:

    smiles  atoms  bonds  aromatic_atoms  total_h

atoms/bonds/aromatic_atoms come from an unsanitized parse (the molecule as
written); total_h is the implicit hydrogen total after sanitization.

Usage: python3 scripts/smiles_oracle.py > crates/core/tests/data/smiles_corpus.tsv
"""

import os
import random
import re

import rdkit
from rdkit import Chem, RDLogger

RDLogger.DisableLog("rdApp.*")

ROOT = os.path.dirname(rdkit.__file__)
SOURCES = [
    os.path.join(ROOT, "Data", "NCI", "first_5K.smi"),
    os.path.join(ROOT, "Contrib", "fraggle", "data", "ChEMBL_11265_actives.smi"),
]

# Hand-written entries exercising %nn ring closures, explicit ring bonds,
# dot-disconnected salts, and stereo marks.
EXTRA = [
    "C%10CCCCC%10",
    "c1ccccc1-c2ccccc2",
    "C1=CC=CC=C1",
    "[Na+].[Cl-]",
    "C/C=C/C",
    "F/C=C\\F",
    "N[C@@H](C)C(=O)O",
    "C[C@H](N)C(=O)O",
    "O=C1CC%11CCC1C%11",
    "[NH4+]",
    "[O-][N+](=O)c1ccccc1",
    "C#N",
    "c1ccc2ccccc2c1",
    "c1cc[nH]c1",
    "Cc1ccncc1",
    "OC(=O)CC(O)(CC(=O)O)C(=O)O",
    "B(O)(O)c1ccccc1",
    "ClC(Cl)(Cl)Cl",
    "BrCCBr",
    "ICI",
]

ALLOWED = re.compile(r"^[A-Za-z0-9\[\]\(\)=#:+\-@/\\%.]+$")


def keep(smi):
    if not ALLOWED.match(smi) or "[H]" in smi or re.search(r"\[\d", smi):
        return False
    return Chem.MolFromSmiles(smi) is not None


def record(smi):
    raw = Chem.MolFromSmiles(smi, sanitize=False)
    san = Chem.MolFromSmiles(smi)
    aromatic = sum(1 for a in raw.GetAtoms() if a.GetIsAromatic())
    total_h = sum(a.GetTotalNumHs() for a in san.GetAtoms())
    return (smi, raw.GetNumAtoms(), raw.GetNumBonds(), aromatic, total_h)


def main():
    pool = []
    for path in SOURCES:
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if parts and keep(parts[0]):
                    pool.append(parts[0])
    pool = sorted(set(pool))
    rng = random.Random(20240601)
    rng.shuffle(pool)
    chosen = [s for s in EXTRA if keep(s)]
    # Every other molecule is rewritten in RDKit's canonical (aromatic,
    # lowercase) form so both Kekule and aromatic notation are covered.
    for i, smi in enumerate(pool):
        if len(chosen) >= 200:
            break
        if i % 2 == 1:
            smi = Chem.MolToSmiles(Chem.MolFromSmiles(smi))
            if not keep(smi):
                continue
        if smi not in chosen:
            chosen.append(smi)
    print("smiles\tatoms\tbonds\taromatic_atoms\ttotal_h")
    for smi in chosen:
        print("\t".join(str(v) for v in record(smi)))


if __name__ == "__main__":
    main()
