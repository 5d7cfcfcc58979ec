import json
import random
from fractions import Fraction

import pytest

from granular.dyadic import ZERO, Dyadic
from granular.errors import IncompleteTable, InvalidInput
from granular.schedule import WagerSchedule
from granular.tables import (CapitalTable, Stage, StagedSupermartingale, check_granularity, check_sandwich,
                             check_supermartingale, granularize, load_staged, random_schedule, random_staged,
                             random_supermartingale, staged_validate)
from oracle import fr, full_values, g_of, is_granular, is_supermartingale, strict_floor, words_upto

C0 = WagerSchedule.parse("const:0")
C1 = WagerSchedule.parse("const:1")


def table(depth, **kw):
    vals = {("" if k == "lam" else k.lstrip("s")): Dyadic.parse(v) if isinstance(v, str) else Dyadic(v)
            for k, v in kw.items()}
    return CapitalTable.from_items(depth, vals, default=ZERO)


def test_supermartingale_examples():
    assert check_supermartingale(CapitalTable.constant(3, Dyadic(1)))
    r = check_supermartingale(table(1, lam=1, s0=2, s1=1))
    assert not r and r.where == ""
    assert check_supermartingale(table(1, lam=1, s0=2, s1=0))


def test_granularity_examples():
    assert check_granularity(table(1, lam=3, s0=2, s1=0), C0)
    r = check_granularity(table(1, lam=1, s0="1/2", s1=0), C0)
    assert not r and r.where == "0"
    assert check_granularity(table(2, lam=1, s00="3/4"), WagerSchedule.parse("linear:1:0"))


def test_table_access_and_json():
    t = table(1, lam=1, s0=2, s1=0)
    assert t["0"] == 2
    with pytest.raises(IncompleteTable):
        CapitalTable(1, {"": Dyadic(1)})["1"]
    assert CapitalTable.from_json(json.loads(json.dumps(t.to_json()))) == t


def test_staged_examples():
    mart = table(1, lam=1, s0=2, s1=0)
    assert staged_validate(StagedSupermartingale.single(mart, C0))
    later = table(1, lam=1, s0=1, s1=1)
    earlier = table(1, lam=1, s0=1, s1=0)
    r = staged_validate(StagedSupermartingale.from_sequence([later, earlier], C0))
    assert not r and "monotonicity at ('1', stage 1)" in r.detail
    bad = table(1, lam=1, s0=2, s1=1)
    r = staged_validate(StagedSupermartingale.single(bad, C0))
    assert not r and "supermartingale at ''" in r.detail
    with pytest.raises(InvalidInput):
        staged_validate(StagedSupermartingale(C0, ()))


def test_incremental_matches_full_validation():
    # the changed-entry checks must agree with a full recheck on random edits
    for seed in range(150):
        rng = random.Random(seed)
        g = random_schedule(rng)
        S = random_staged(rng, g, rng.randint(1, 5), rng.randint(2, 4))
        stages = list(S.stages)
        k = rng.randrange(1, len(stages))
        vals = dict(stages[k].table.values)
        s = rng.choice(sorted(vals))
        vals[s] = vals[s] + Dyadic(rng.choice([1, 1, 3]), g(len(s)) + rng.choice([0, 0, 1]))
        stages[k] = Stage(CapitalTable(S.depth, vals), stages[k].tails)
        T = StagedSupermartingale(g, tuple(stages))
        assert bool(staged_validate(T)) == bool(staged_validate(T, full=True))


def test_random_staged_is_valid():
    for seed in range(100):
        rng = random.Random(seed)
        g = random_schedule(rng)
        depth = rng.randint(1, 6)
        q = tuple(Dyadic(rng.randint(0, 2), rng.randint(0, 3)) for _ in range(depth + 1)) if seed % 2 else ()
        S = random_staged(rng, g, depth, rng.randint(1, 4), q)
        gf = g_of(g)
        prev = None
        for st in S.stages:
            full = full_values(st.table, st.tails)
            assert is_supermartingale(full, depth)
            assert is_granular({s: fr(v) for s, v in st.table.values.items()}, gf)
            if prev is not None:
                assert all(full[s] >= prev[s] for s in full)
            prev = full


def test_staged_json_roundtrip(tmp_path):
    rng = random.Random(5)
    S = random_staged(rng, C1, 3, 3, (Dyadic(1, 2), ZERO, Dyadic(1, 1), ZERO))
    p = tmp_path / "s.json"
    p.write_text(json.dumps(S.to_json()))
    assert load_staged(str(p)) == S
    p.write_text(json.dumps({"schedule": "const:0", "depth": 1, "values": {"": "1", "0": "2", "1": 0}}))
    assert load_staged(str(p)).limit.table == table(1, lam=1, s0=2, s1=0)


def test_granularize_examples():
    one = CapitalTable(0, {"": Dyadic(1)})
    assert granularize(one, C1, 2, inclusive=False).limit.full()[""] == Dyadic(3, 1)
    assert granularize(one, C1, 2).limit.full()[""] == Dyadic(2)
    five8 = CapitalTable(0, {"": Dyadic(5, 3)})
    assert granularize(five8, C1, 1, inclusive=False).limit.full()[""] == Dyadic(1)
    assert granularize(five8, C1, 1).limit.full()[""] == Dyadic(3, 1)
    zero = CapitalTable.constant(2, ZERO)
    out = granularize(zero, C1, 3).limit.full()
    assert [fr(out[s]) for s in ["", "0", "01"]] == [2, Fraction(3, 2), 1]
    with pytest.raises(InvalidInput):
        granularize(zero, C1, 1)


def test_exclusive_tail_breaks_for_growing_schedule():
    g = WagerSchedule.parse("linear:1:0")
    N = table(1, lam=1, s0=2, s1=0)
    ex = granularize(N, g, 1, inclusive=False).limit
    assert not check_supermartingale(ex.table, ex.tails)
    inc = granularize(N, g, 1).limit
    assert check_supermartingale(inc.table, inc.tails)


def test_granularize_random_against_oracle():
    for seed in range(120):
        rng = random.Random(seed)
        depth = rng.randint(0, 6)
        N = random_supermartingale(rng, WagerSchedule("const", (rng.randint(0, 5),)), depth)
        g = random_schedule(rng)
        H = depth + rng.randint(0, 3)
        out = granularize(N, g, H).limit
        gf = g_of(g)
        for s in words_upto(depth):
            n = len(s)
            tail = sum(Fraction(1, 2 ** gf(i)) for i in range(n, H + 1))
            want = tail + strict_floor(fr(N[s]), Fraction(1, 2 ** gf(n)))
            assert fr(out.full()[s]) == want
        assert is_supermartingale(full_values(out.table, out.tails), depth)
        assert check_granularity(out.table, g)
        assert check_sandwich(N, out.full(), g, H)


def test_sandwich_detects_violation():
    N = table(1, lam=1, s0=2, s1=0)
    out = granularize(N, C1, 1).limit.full()
    assert check_sandwich(N, out, C1, 1)
    bumped = out.with_values({"0": out["0"] + Dyadic(1)})
    assert not check_sandwich(N, bumped, C1, 1)
    lowered = out.with_values({"": Dyadic(1, 2)})
    assert not check_sandwich(N, lowered, C1, 1)
