import math
import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from oracles import all_energies, random_graph
from qubo_forge import _kernels
from qubo_forge.errors import ContractError, LimitExceededError
from qubo_forge.graph import Graph, load_graph
from qubo_forge.qubo import PenaltyConfig, QuboMatrix, build_M_HCP, build_M_TSP, build_M_vp, energy
from qubo_forge.solve import (
    AnnealSchedule,
    exact_ground_state,
    oracle_hcp,
    oracle_tsp,
    simulated_anneal,
)
from qubo_forge.tour import Tour, check, decode

BACKENDS = sorted(_kernels.available_backends())
QUICK = AnnealSchedule(sweeps=200, restarts=4, seed=7)


def _stable(report):
    d = report.to_dict()
    d.pop("wall_time_ms")
    return d


class TestSchedule:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(t_end=0), dict(t_start=0.001, t_end=0.01), dict(sweeps=0), dict(restarts=0), dict(seed=-1)],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ContractError):
            AnnealSchedule(**kwargs)

    def test_default_start_scales_with_coefficients(self, g1):
        m = build_M_HCP(g1)
        assert AnnealSchedule().resolved_t_start(m) == 10 * m.max_abs()
        betas = AnnealSchedule(t_start=10, t_end=0.05, sweeps=5).betas(m)
        assert betas[0] == pytest.approx(0.1) and betas[-1] == pytest.approx(20.0)


class TestAnneal:
    def test_complete_four_hcp(self):
        g = Graph.complete(4)
        r = simulated_anneal(build_M_HCP(g), AnnealSchedule(), g)
        assert r.best_energy == -8 and r.best_hamiltonian == 0 and r.valid

    def test_g1_normalised_tsp(self, g1):
        r = simulated_anneal(build_M_TSP(g1, normalize=True), AnnealSchedule(), g1)
        assert r.valid and r.cost == 97 and r.tour.order == (1, 2, 3, 4)

    def test_zero_matrix(self):
        m = QuboMatrix(2, sp.csr_array((4, 4), dtype=np.float64))
        r = simulated_anneal(m, QUICK)
        assert r.best_energy == 0 and r.variables == 4

    def test_deterministic(self, g1):
        m = build_M_TSP(g1, normalize=True)
        assert _stable(simulated_anneal(m, QUICK, g1)) == _stable(simulated_anneal(m, QUICK, g1))

    def test_thread_count_does_not_matter(self, g1):
        m = build_M_TSP(g1, normalize=True)
        one = simulated_anneal(m, QUICK, g1, threads=1)
        many = simulated_anneal(m, QUICK, g1, threads=4)
        assert _stable(one) == _stable(many)

    @pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernel not built")
    def test_backends_agree_bit_for_bit(self, data_dir):
        g = load_graph(data_dir / "h6.hcp")
        m = build_M_HCP(g)
        a = simulated_anneal(m, QUICK, g, backend="python")
        b = simulated_anneal(m, QUICK, g, backend="cython")
        assert a.restart_energies == b.restart_energies
        assert np.array_equal(a.best_bits, b.best_bits)

    def test_debug_mode_verifies_every_flip(self, g1):
        m = build_M_TSP(g1, normalize=True)
        s = AnnealSchedule(sweeps=50, restarts=2, seed=3)
        plain = simulated_anneal(m, s, g1, backend="python", threads=1)
        checked = simulated_anneal(m, s, g1, debug=True)
        assert _stable(plain) == _stable(checked)

    def test_debug_mode_catches_drift(self, g1, monkeypatch):
        from qubo_forge import _pycore

        real = _pycore.anneal_sweeps

        def broken(*args, **kwargs):
            args = list(args)
            args[8] += 1.0  # corrupt the running energy
            return real(*args, **kwargs)

        monkeypatch.setattr(_pycore, "anneal_sweeps", broken)
        with pytest.raises(AssertionError, match="drifted"):
            simulated_anneal(build_M_HCP(g1), AnnealSchedule(sweeps=5, restarts=1), debug=True)

    def test_best_never_worse_than_start(self, g1):
        m = build_M_TSP(g1)
        s = AnnealSchedule(sweeps=3, restarts=6, seed=11)
        r = simulated_anneal(m, s)
        for restart, e in enumerate(r.restart_energies):
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([s.seed, restart])))
            start = rng.integers(0, 2, size=m.dim, dtype=np.int8)
            assert e <= energy(m, start)

    def test_invalid_result_has_invalid_basis_cost(self, data_dir):
        g = load_graph(data_dir / "burma14.tsp")
        r = simulated_anneal(build_M_TSP(g, normalize=False), AnnealSchedule(sweeps=100, restarts=2), g)
        assert r.valid is False and r.cost_basis == "invalid" and r.success_rate == 0.0
        assert r.violations.count > 0
        d = r.to_dict("burma14", "tsp")
        assert d["variables"] == 196 and d["tour"] is None

    def test_report_fields(self, g1):
        d = simulated_anneal(build_M_TSP(g1, normalize=True), QUICK, g1).to_dict("g1", "tsp")
        for key in ("instance", "problem", "variables", "best_energy", "cost", "valid", "success_rate",
                    "wall_time_ms", "schedule", "seed", "violations"):  # fmt: skip
            assert key in d
        assert d["seed"] == 7 and d["violations"] == {"vertex": [], "position": [], "edge": []}

    def test_graph_mismatch(self, g1):
        with pytest.raises(ContractError):
            simulated_anneal(build_M_HCP(Graph.complete(3)), QUICK, g1)


class TestExact:
    @pytest.mark.parametrize("backend", BACKENDS)
    def test_documented_ground_states(self, backend, data_dir):
        gs = exact_ground_state(build_M_HCP(Graph.complete(4)), backend=backend)
        assert (gs.energy, gs.count) == (-8, 24)
        assert isinstance(decode(gs.witness, Graph.complete(4)), Tour)
        cycle = load_graph(data_dir / "cycle4.hcp")
        gs = exact_ground_state(build_M_HCP(cycle), backend=backend)
        assert (gs.energy, gs.count) == (-8, 8)
        gs = exact_ground_state(build_M_vp(2), backend=backend)
        assert (gs.energy, gs.count) == (-2, 4)

    def test_limit(self):
        with pytest.raises(LimitExceededError):
            exact_ground_state(build_M_vp(6))
        with pytest.raises(LimitExceededError):
            exact_ground_state(build_M_vp(4), limit=15)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_matches_brute_force(self, backend, rng):
        for _ in range(5):
            dense = rng.normal(size=(9, 9))
            m = QuboMatrix(3, sp.csr_array(dense))
            _, e = all_energies(m)
            gs = exact_ground_state(m, backend=backend)
            assert gs.energy == pytest.approx(e.min(), abs=1e-9)
            assert gs.count == int(np.sum(np.abs(e - e.min()) <= 1e-9))

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_penalty_soundness_complete(self, n, rng):
        # Distinct weights: when the two heaviest edges tie, dropping their shared vertex ties the optimum.
        for _ in range(6):
            g = random_graph(rng, n, 0, directed=False, distinct=True)
            self._assert_all_optima_valid(g, PenaltyConfig(1, 1))

    def test_penalty_soundness_incomplete_needs_larger_c1(self, rng):
        found = checked = 0
        while checked < 12:
            g = random_graph(rng, 4, 2 * int(rng.integers(1, 3)), directed=False, distinct=True)
            if not oracle_hcp(g)[0]:
                continue
            checked += 1
            self._assert_all_optima_valid(g, PenaltyConfig(2, 1))
            found += not self._all_optima_valid(g, PenaltyConfig(1, 1))
        assert found > 0  # c1 = 1 is not enough once edges are missing

    @staticmethod
    def _all_optima_valid(g, cfg):
        m = build_M_TSP(g, cfg, normalize=True)
        xs, e = all_energies(m)
        optima = xs[np.abs(e - e.min()) <= 1e-9]
        return all(check(x, g).valid for x in optima)

    def _assert_all_optima_valid(self, g, cfg):
        assert self._all_optima_valid(g, cfg), g.weights.tolist()

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_consistent_with_tour_oracle(self, n, rng):
        for _ in range(3 if n < 5 else 1):
            g = random_graph(rng, n, 0, directed=False, distinct=True)
            opt = oracle_tsp(g, method="permutation")
            gs = exact_ground_state(build_M_TSP(g, normalize=True))
            decoded = decode(gs.witness, g)
            assert isinstance(decoded, Tour) and decoded.cost == opt.cost

    def test_consistent_on_incomplete_graphs(self, rng):
        for _ in range(6):
            g = random_graph(rng, 4, 2 * int(rng.integers(0, 4)), directed=False, distinct=True)
            opt = oracle_tsp(g, method="permutation")
            decoded = decode(exact_ground_state(build_M_TSP(g, PenaltyConfig(2, 1), normalize=True)).witness, g)
            if opt.feasible:
                assert isinstance(decoded, Tour) and decoded.cost == opt.cost
            else:
                assert not isinstance(decoded, Tour)


class TestOracles:
    def test_g1(self, g1):
        for method in ("permutation", "held_karp"):
            opt = oracle_tsp(g1, method=method)
            assert opt.cost == 97 and opt.tour.order == (1, 2, 3, 4)

    def test_four_cycle(self, data_dir):
        assert oracle_tsp(load_graph(data_dir / "cycle4.hcp")).cost == 4

    def test_infeasible(self, data_dir):
        opt = oracle_tsp(load_graph(data_dir / "star4.hcp"))
        assert not opt.feasible and math.isinf(opt.cost)

    def test_limits_and_method(self, g1):
        with pytest.raises(LimitExceededError):
            oracle_tsp(Graph.complete(13), method="permutation")
        with pytest.raises(LimitExceededError):
            oracle_tsp(Graph.complete(21))
        with pytest.raises(ContractError):
            oracle_tsp(g1, method="greedy")

    @pytest.mark.parametrize("directed", [False, True])
    def test_held_karp_matches_enumeration(self, directed, rng):
        for n in range(1, 8):
            for _ in range(4):
                k = int(rng.integers(0, n * (n - 1) // 2 + 1))
                g = random_graph(rng, n, k if directed else k - k % 2, directed=directed)
                a, b = oracle_tsp(g, "held_karp"), oracle_tsp(g, "permutation")
                assert a.cost == b.cost
                if a.feasible:
                    assert a.tour.cost == a.cost

    def test_held_karp_float_weights(self, rng):
        w = rng.uniform(0.5, 3.0, size=(7, 7))
        w = np.triu(w, 1) + np.triu(w, 1).T
        g = Graph.from_matrix(w)
        assert oracle_tsp(g).cost == pytest.approx(oracle_tsp(g, "permutation").cost)

    def test_hcp_examples(self, data_dir):
        assert oracle_hcp(Graph.complete(5))[0]
        assert not oracle_hcp(load_graph(data_dir / "star4.hcp"))[0]
        exists, tour = oracle_hcp(load_graph(data_dir / "h6.hcp"))
        assert exists and tour.cost == 6
        assert oracle_hcp(load_graph(data_dir / "heawood14.hcp"))[0]

    def test_petersen_is_not_hamiltonian(self):
        outer = [(i, (i + 1) % 5) for i in range(5)]
        spokes = [(i, i + 5) for i in range(5)]
        inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
        assert oracle_hcp(Graph.from_edges(10, outer + spokes + inner)) == (False, None)

    @pytest.mark.parametrize("directed", [False, True])
    def test_hcp_matches_tsp_feasibility(self, directed, rng):
        for n in range(1, 8):
            for _ in range(6):
                k = int(rng.integers(0, n * (n - 1) + 1))
                g = random_graph(rng, n, k if directed else k - k % 2, directed=directed)
                assert oracle_hcp(g)[0] == oracle_tsp(g, "permutation").feasible


class TestBackendSelection:
    def test_environment_forces_fallback(self):
        env = dict(os.environ, QUBO_FORGE_PURE_PYTHON="1")
        code = "from qubo_forge import _kernels; print(_kernels.BACKEND, sorted(_kernels.available_backends()))"
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        assert out.stdout.startswith("python ")

    def test_default_prefers_compiled(self):
        expected = "cython" if "cython" in _kernels.available_backends() else "python"
        if os.environ.get("QUBO_FORGE_PURE_PYTHON", "") not in ("", "0"):
            pytest.skip("fallback forced by environment")
        assert _kernels.BACKEND == expected
