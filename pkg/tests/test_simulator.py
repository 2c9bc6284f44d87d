import math

import numpy as np
import pytest

from harag.codecs import compress
from harag.core import Kind, Scheme, bf16_decode
from harag.hotness import partition, compress_corpus, sort_by_frequency
from harag.placement import Link, Tier, build_lists
from harag.simulator import (
    KEY_CLIP,
    REPORT_HEADER,
    SUMMARY_HEADER,
    VALUE_CLIP,
    ChunkInfo,
    CostModel,
    Mode,
    Workload,
    ablation,
    gen_corpus,
    gen_workload,
    profile_from_workload,
    query_latency,
    run,
)
from harag.placement import AccessOutcome


@pytest.fixture(scope="module")
def setup(small_corpus):
    w = gen_workload(len(small_corpus), 200, 3, seed=1)
    prof = profile_from_workload(w)
    ranked = sort_by_frequency(prof)
    store = compress_corpus(small_corpus, partition(ranked, 0.1, 0.1, 0.1))
    lists = build_lists(ranked, 0.1, 0.1, 0.2)
    return store, w, lists


class TestCorpus:
    def test_ids_and_kinds(self, small_corpus):
        assert [c.id for c in small_corpus] == list(range(12))
        assert all(c.kind is (Kind.KEY if c.id % 2 == 0 else Kind.VALUE) for c in small_corpus)
        assert all((c.token_count, c.width) == (32, 64) for c in small_corpus)

    def test_deterministic(self, small_corpus):
        assert gen_corpus(6, 32, 64, seed=7) == small_corpus
        assert gen_corpus(6, 32, 64, seed=8) != small_corpus

    def test_ranges(self, small_corpus):
        for c in small_corpus:
            v = c.values()
            lim = KEY_CLIP if c.kind is Kind.KEY else VALUE_CLIP
            assert np.abs(v).max() <= lim
        keys = np.concatenate([c.values() for c in small_corpus if c.kind is Kind.KEY])
        vals = np.concatenate([c.values() for c in small_corpus if c.kind is Kind.VALUE])
        assert np.std(keys) > 2 * np.std(vals)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            gen_corpus(0)


class TestWorkload:
    def test_zipf_head_share(self):
        w = gen_workload(2000, 4096, 4, zipf_s=1.1, seed=0)
        counts = np.sort(np.bincount(np.concatenate(w.queries), minlength=2000))[::-1]
        assert counts[:20].sum() / counts.sum() >= 0.30

    def test_distinct_within_query(self):
        w = gen_workload(10, 300, 5, seed=2)
        assert all(len(set(q)) == 5 for q in w.queries)
        assert w.total_accesses == 1500

    def test_k_equals_n(self):
        w = gen_workload(6, 10, 6, seed=3)
        assert all(sorted(q) == list(range(6)) for q in w.queries)

    def test_uniform(self):
        w = gen_workload(200, 25000, 4, zipf_s=0.0, seed=4)
        counts = np.bincount(np.concatenate(w.queries), minlength=200)
        assert counts.max() / counts.min() <= 2

    def test_deterministic(self):
        assert gen_workload(50, 20, 3, seed=9) == gen_workload(50, 20, 3, seed=9)
        assert gen_workload(50, 20, 3, seed=9) != gen_workload(50, 20, 3, seed=10)

    @pytest.mark.parametrize("n,k,s", [(5, 6, 1.1), (5, 0, 1.1), (5, 2, -1.0)])
    def test_invalid(self, n, k, s):
        with pytest.raises(ValueError):
            gen_workload(n, 1, k, zipf_s=s)

    def test_profile_totals(self):
        w = gen_workload(30, 100, 4, seed=5)
        prof = profile_from_workload(w)
        assert set(prof.counts) == set(range(30))
        assert prof.total == w.total_accesses


class TestCostModel:
    def test_load_times(self):
        m = CostModel()
        n = 1_000_000
        assert m.load_time(Tier.GPU, n, Scheme.INT8) == 1e-6
        pin = 50e-6 + n / 25e9
        page = 50e-6 + n / 10e9
        disk = 50e-6 + n / 2e9
        assert m.load_time(Tier.PIN, n, None) == pytest.approx(pin)
        assert m.load_time(Tier.PAGE, n, None) == pytest.approx(pin + page)
        assert m.load_time(Tier.DISK, n, None) == pytest.approx(pin + page + disk)
        assert m.load_time(Tier.PIN, n, Scheme.GSE8) == pytest.approx(pin + n / 100e9)

    def test_decode_rate_ordering(self):
        r = CostModel().decode_rate
        assert r[Scheme.GSE8] > r[Scheme.INT8] > r[Scheme.FP8_E5M2] > r[Scheme.FP8_E4M3]

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            CostModel(bandwidth=dict.fromkeys(Link, 0.0))
        with pytest.raises(ValueError):
            CostModel(gpu_access_time=-1.0)

    def test_query_latency_sums_outcomes(self):
        m = CostModel()
        outs = [AccessOutcome(1, Tier.GPU, (), ()), AccessOutcome(2, Tier.DISK, (), ())]
        got = query_latency(outs, {1: 100, 2: 200}, m, {2: Scheme.INT8})
        assert got == pytest.approx(m.load_time(Tier.GPU, 100, None) + m.load_time(Tier.DISK, 200, Scheme.INT8))


class TestRun:
    def test_no_caching_no_compression_is_parity(self, small_corpus):
        store = [compress(c, Scheme.INT8) for c in small_corpus]
        w = gen_workload(12, 50, 2, seed=0)
        lists = build_lists(list(range(12)), 0, 0, 0)
        rep = run(store, w, lists, compressed=False)
        assert all(s == pytest.approx(1.0) for s in rep.speedup)

    def test_baseline_only(self, setup):
        store, w, lists = setup
        rep = run(store, w, lists, baseline_only=True)
        assert rep.ha_latency == pytest.approx(rep.baseline_latency)
        assert rep.tier_hits[Tier.DISK] == w.total_accesses

    def test_accounting(self, setup):
        store, w, lists = setup
        rep = run(store, w, lists, check_invariants=True)
        assert rep.total_accesses == w.total_accesses
        assert all(sum(h) == len(q) for h, q in zip(rep.hits, w.queries))
        size = {c.id: c.nbytes for c in store}
        hot = rep.tier_hits
        assert rep.bytes_moved[Link.PIN_TO_GPU] >= rep.bytes_moved[Link.PAGE_TO_PIN] >= rep.bytes_moved[Link.DISK_TO_PAGE]
        assert hot[Tier.GPU] > 0
        assert rep.bytes_moved[Link.DISK_TO_PAGE] <= hot[Tier.DISK] * max(size.values())

    def test_full_beats_mp_only_beats_baseline(self, setup):
        store, w, lists = setup
        full = np.mean(ablation(store, w, lists, Mode.FULL).speedup)
        mp = np.mean(ablation(store, w, lists, Mode.MP_ONLY).speedup)
        assert full >= mp >= 1.0

    def test_mp_only_has_no_cache_hits(self, setup):
        store, w, lists = setup
        rep = ablation(store, w, lists, Mode.MP_ONLY)
        assert rep.tier_hits[Tier.DISK] == w.total_accesses

    def test_dp_modes(self, setup):
        store, w, lists = setup
        no_pin = ablation(store, w, lists, Mode.DP_NO_PIN)
        pin_only = ablation(store, w, lists, Mode.DP_PIN_ONLY)
        assert no_pin.tier_hits[Tier.PIN] == 0
        assert pin_only.tier_hits[Tier.GPU] == pin_only.tier_hits[Tier.PAGE] == 0
        raw = store[0].raw_nbytes
        assert no_pin.bytes_moved[Link.PIN_TO_GPU] % raw == 0

    def test_chunk_info_equivalent(self, setup):
        store, w, lists = setup
        a = run(store, w, lists)
        b = run([ChunkInfo.of(c) for c in store], w, lists)
        assert a == b

    def test_warmup_on_repeating_trace(self, small_corpus):
        store = [compress(c, Scheme.GSE8) for c in small_corpus]
        lists = build_lists(list(range(12)), 0.25, 0.25, 0.25)
        w = Workload(tuple([(0, 1, 2)] * 6), 0, 0.0, 3, 12)
        lat = run(store, w, lists).ha_latency
        assert all(b <= a for a, b in zip(lat, lat[1:]))
        assert lat[-1] < lat[0]

    def test_unknown_chunk(self, setup):
        store, _, lists = setup
        bad = Workload(((999,),), 0, 0.0, 1, 12)
        with pytest.raises(ValueError, match="unknown chunk"):
            run(store, bad, lists)


def test_csv_headers(setup):
    store, w, lists = setup
    rep = run(store, w, lists)
    lines = rep.to_csv().splitlines()
    assert lines[0].split(",") == REPORT_HEADER
    assert len(lines) == len(w.queries) + 1
    summ = rep.summary_csv().splitlines()
    assert summ[0].split(",") == SUMMARY_HEADER and len(summ) == 2
    s = rep.summary()
    assert math.isclose(s["mean_speedup"], float(np.mean(rep.speedup)))
