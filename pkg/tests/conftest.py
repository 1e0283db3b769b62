from __future__ import annotations

import pytest

from branchstat.grid_model import BaseQuantities, BranchKind, BranchRecord
from branchstat.toy import toy_records


def line(id="L1", kv=230.0, x=0.01, r=0.001, s_base=100.0, rating=300.0, length=10.0, geo=None):
    return BranchRecord(
        id=id, kind=BranchKind.LINE, x_pu=x, r_pu=r, system_base=BaseQuantities(kv, s_base),
        kv_high=kv, kv_low=kv, rating_mva=rating, length_km=length, endpoints_geo=geo,
    )


def xfmr(id="T1", kv_high=230.0, kv_low=115.0, x=0.05, r=0.001, s_base=100.0, rating=100.0):
    return BranchRecord(
        id=id, kind=BranchKind.TRANSFORMER, x_pu=x, r_pu=r, system_base=BaseQuantities(kv_high, s_base),
        kv_high=kv_high, kv_low=kv_low, rating_mva=rating,
    )


@pytest.fixture(scope="session")
def toy():
    return toy_records()
