"""Regenerate src/dlvmc/data/*.json from basis_set_exchange (dev-time only)."""
import json
import pathlib

import basis_set_exchange as bse

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "dlvmc" / "data"

for name in ("STO-3G", "STO-6G"):
    data = bse.get_basis(name, elements=list(range(1, 37)), fmt=None)
    table = {}
    for z, el in sorted(data["elements"].items(), key=lambda kv: int(kv[0])):
        shells = []
        for sh in el["electron_shells"]:
            exps = [float(e) for e in sh["exponents"]]
            for l, coefs in zip(sh["angular_momentum"], sh["coefficients"]):
                shells.append({"l": l, "exponents": exps, "coefficients": [float(c) for c in coefs]})
        table[z] = shells
    (OUT / f"{name.lower().replace('-', '')}.json").write_text(json.dumps(table, indent=1))
    print(name, len(table))
