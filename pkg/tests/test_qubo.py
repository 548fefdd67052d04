import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import all_energies, h_ec, h_pv, h_vp, h_w, is_permutation_matrix, random_graph
from qubo_forge.errors import ContractError, DegenerateNormalizationError
from qubo_forge.graph import Graph, edge_census
from qubo_forge.qubo import (
    ConstraintCensus,
    PenaltyConfig,
    QuboMatrix,
    build_M_Ec,
    build_M_HCP,
    build_M_pv,
    build_M_TSP,
    build_M_vp,
    build_M_W,
    census,
    census_expected,
    census_expected_for,
    energy,
    folded_block,
    shift_block,
)
from qubo_forge.tour import encode


class TestBlocks:
    def test_shift_wraps_to_first_column(self):
        assert shift_block(4).toarray()[3].tolist() == [1, 0, 0, 0]

    def test_folded_stays_upper(self):
        f = folded_block(4).toarray()
        assert f[0].tolist() == [0, 1, 0, 1]
        assert not np.tril(f).any()

    @pytest.mark.parametrize("n, expected", [(1, [[1]]), (2, [[0, 2], [0, 0]])])
    def test_small_folded_blocks_merge(self, n, expected):
        assert folded_block(n).toarray().tolist() == expected


class TestBuilders:
    def test_vp_single_vertex(self):
        m = build_M_vp(1)
        assert m.toarray().tolist() == [[-1]] and m.offset == 1
        assert energy(m, [1], include_offset=True) == 0

    def test_vp_all_zero_three(self):
        assert energy(build_M_vp(3), np.zeros(9), include_offset=True) == 3

    def test_vp_all_ones_two(self):
        m = build_M_vp(2)
        assert energy(m, np.ones(4)) == 0
        assert energy(m, np.ones(4), include_offset=True) == 2

    def test_pv_examples(self):
        m = build_M_pv(2)
        x = encode((1, 2), 2)
        assert energy(m, x) == -2 and energy(m, x, include_offset=True) == 0
        assert energy(build_M_pv(3), np.ones(9), include_offset=True) == 12

    def test_pv_layout(self):
        a = build_M_pv(3).toarray()
        for i in range(9):
            for j in range(9):
                want = -1 if i == j else (2 if i < j and i % 3 == j % 3 else 0)
                assert a[i, j] == want

    def test_ec_removed_edge_adds_eight_terms(self, g1):
        base = build_M_Ec(g1).toarray()
        cut = build_M_Ec(g1.without_edge(0, 2)).toarray()
        diff = cut - base
        assert diff.sum() == 8 and set(np.unique(diff)) <= {0, 1}
        assert diff[0:4, 8:12].tolist() == shift_block(4).toarray().tolist()
        assert diff[8:12, 0:4].tolist() == shift_block(4).toarray().tolist()

    def test_ec_empty_two_node_graph(self):
        g = Graph(n=2, directed=False, weights=np.zeros((2, 2), dtype=np.int64))
        a = build_M_Ec(g).toarray()
        assert a[0:2, 0:2].tolist() == [[0, 2], [0, 0]]
        assert a[0:2, 2:4].tolist() == [[0, 1], [1, 0]]

    def test_ec_directed_missing_arc_only_fills_its_block(self):
        w = np.ones((3, 3), dtype=np.int64)
        np.fill_diagonal(w, 0)
        w[0, 2] = 0
        a = build_M_Ec(Graph(n=3, directed=True, weights=w)).toarray()
        assert a[0:3, 6:9].any() and not a[6:9, 0:3].any()

    def test_w_zero_graph(self):
        g = Graph(n=3, directed=False, weights=np.zeros((3, 3), dtype=np.int64))
        assert build_M_W(g).coeffs.nnz == 0

    def test_w_tour_energy(self, g1):
        assert energy(build_M_W(g1), encode((1, 2, 3, 4), 4)) == 97

    def test_hcp_scales_linearly(self, g1):
        one, five = build_M_HCP(g1), build_M_HCP(g1, PenaltyConfig(c1=5))
        assert np.array_equal(five.toarray(), 5 * one.toarray()) and five.offset == 5 * one.offset == 40

    def test_tsp_with_zero_c2_is_hcp(self, g1):
        tsp = build_M_TSP(g1, PenaltyConfig(c1=1, c2=0))
        assert np.array_equal(tsp.toarray(), build_M_HCP(g1).toarray())

    def test_tsp_tour_energy(self, g1):
        x = encode((1, 2, 3, 4), 4)
        assert energy(build_M_TSP(g1), x) == 89
        assert energy(build_M_TSP(g1), x, include_offset=True) == 97

    def test_normalised_tsp_is_float_with_stats(self, g1):
        m = build_M_TSP(g1, normalize=True)
        assert m.coeffs.dtype == np.float64
        assert m.meta == {"m_min": 0, "m_max": 42}

    def test_normalise_degenerate(self):
        g = Graph(n=2, directed=False, weights=np.zeros((2, 2), dtype=np.int64))
        with pytest.raises(DegenerateNormalizationError):
            build_M_TSP(g, normalize=True)

    def test_folded_on_directed_refused(self):
        with pytest.raises(ContractError):
            build_M_W(Graph.from_edges(3, [(0, 1), (1, 2), (2, 0)], directed=True), folded=True)

    def test_penalty_config_validation(self):
        with pytest.raises(ContractError):
            PenaltyConfig(c1=0)
        with pytest.raises(ContractError):
            PenaltyConfig(c2=-1)

    @pytest.mark.parametrize("which", [build_M_vp, build_M_pv])
    def test_matrices_stay_integral(self, which):
        assert which(4).coeffs.dtype == np.int64

    def test_goldens(self, g1, goldens):
        cfg = PenaltyConfig(1, 1)
        built = {
            "M_vp": build_M_vp(4),
            "M_pv": build_M_pv(4),
            "M_Ec": build_M_Ec(g1),
            "M_W": build_M_W(g1),
            "M_HCP": build_M_HCP(g1, cfg),
            "M_TSP": build_M_TSP(g1, cfg),
        }
        for name, m in built.items():
            assert np.array_equal(m.toarray(), goldens[name]), name
        norm = build_M_TSP(g1, cfg, normalize=True).toarray()
        assert np.abs(norm - goldens["N_TSP"]).max() <= 5e-3


class TestEnergy:
    def test_zero_vector(self, g1):
        m = build_M_TSP(g1)
        assert energy(m, np.zeros(16)) == 0
        assert energy(m, np.zeros(16), include_offset=True) == 8

    def test_shape_mismatch(self, g1):
        with pytest.raises(ContractError):
            energy(build_M_HCP(g1), np.zeros(15))

    def test_integer_energy_is_python_int(self, g1):
        assert type(energy(build_M_TSP(g1), np.ones(16))) is int

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 5), st.data())
    def test_one_hot_identities(self, n, data):
        x = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n * n, max_size=n * n)))
        assert energy(build_M_vp(n), x, include_offset=True) == h_vp(x, n)
        assert energy(build_M_pv(n), x, include_offset=True) == h_pv(x, n)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    @pytest.mark.parametrize("directed", [False, True])
    def test_edge_and_weight_identities(self, n, directed, rng):
        for k in range(0, n * (n - 1) + 1, 1 if directed else 2):
            g = random_graph(rng, n, k, directed=directed)
            ec, w = build_M_Ec(g), build_M_W(g)
            for _ in range(20):
                x = rng.integers(0, 2, size=n * n)
                assert energy(ec, x) == h_ec(x, g)
                assert energy(w, x) == h_w(x, g)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_folded_weights_energy_equivalent(self, n, rng):
        g = random_graph(rng, n, 0, directed=False)
        a, b = build_M_W(g), build_M_W(g, folded=True)
        for _ in range(50):
            x = rng.integers(0, 2, size=n * n)
            assert energy(a, x) == energy(b, x)

    def test_canonical_upper_preserves_energy(self, g1, rng):
        for m in (build_M_TSP(g1), build_M_TSP(g1, normalize=True)):
            up = m.canonical_upper()
            assert not np.tril(up.toarray(), -1).any()
            for _ in range(50):
                x = rng.integers(0, 2, size=16)
                assert energy(up, x) == pytest.approx(energy(m, x), abs=1e-12)


class TestCensus:
    def test_g1_totals(self, g1):
        assert census(build_M_HCP(g1)) == ConstraintCensus(16, 48)
        assert census(build_M_TSP(g1)).total == 112

    def test_zero_matrix(self):
        import scipy.sparse as sp

        assert census(QuboMatrix(2, sp.csr_array((4, 4), dtype=np.int64))).as_dict() == {
            "linear": 0,
            "quadratic": 0,
            "total": 0,
        }

    def test_complete_closed_forms(self):
        assert census_expected(4, 12, 0, "HCP", complete=True).total == 64
        assert census_expected(4, 12, 0, "TSP", complete=True).total == 112
        assert census_expected(4, 12, 0, "HEc", complete=True).total == 0

    def test_heawood_instance(self, data_dir):
        from qubo_forge.graph import load_graph

        g = load_graph(data_dir / "heawood14.hcp")
        ec = edge_census(g)
        assert (ec.m, ec.k) == (42, 140)
        assert census(build_M_HCP(g)).total == 14**3 + 14 * ec.k == census_expected_for(g, "HCP").total

    def test_precondition(self):
        with pytest.raises(ContractError):
            census_expected(4, 10, 0, "HCP")
        with pytest.raises(ContractError):
            census_expected(4, 10, 2, "HCP", complete=True)
        with pytest.raises(ContractError):
            census_expected(4, 12, 0, "HXY")

    @pytest.mark.parametrize("n", range(2, 7))
    def test_one_hot_census(self, n):
        want = census_expected(n, n * (n - 1), 0, "Hvp")
        assert census(build_M_vp(n)) == want == census(build_M_pv(n))

    @pytest.mark.parametrize("n", range(2, 7))
    def test_weights_census(self, n, rng):
        for k in range(0, n * (n - 1) + 1, 3):
            g = random_graph(rng, n, k)
            assert census(build_M_W(g)) == census_expected_for(g, "HW")
            assert census(build_M_TSP(g)) == census_expected_for(g, "TSP")

    def test_removing_edges_never_shrinks(self, rng):
        g = Graph.complete(6)
        prev = census(build_M_HCP(g)).total
        pairs = [(u, v) for u in range(6) for v in range(u + 1, 6)]
        for i in rng.permutation(len(pairs)):
            g = g.without_edge(*pairs[i])
            cur = census(build_M_HCP(g)).total
            assert cur == prev + 2 * 6
            prev = cur


class TestGroundStates:
    @pytest.mark.parametrize("n", [2, 3])
    def test_hcp_zero_exactly_on_tours(self, n):
        m = build_M_HCP(Graph.complete(n))
        xs, e = all_energies(m)
        h = e + m.offset
        tours = np.array([is_permutation_matrix(x, n) for x in xs])
        assert (h[tours] == 0).all() and (h[~tours] > 0).all()
