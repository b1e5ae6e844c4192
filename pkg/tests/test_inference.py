import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from astcrf.features import build_vocabulary
from astcrf.inference import (CliqueKind, InferenceError, brute_force_inference,
                              build_clique_graph, build_junction_tree,
                              log_partition_and_marginals, map_assignment, score_assignment,
                              top_k)
from astcrf.model import AdmissibleSets, Model, build_admissible_sets
from astcrf.testing import random_model, random_tree
from astcrf.transforms import EMPTY, TransformLabeling
from astcrf.trees import Ast, Node
from test_trees import seven_node_tree


def instance(seed: int):
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    ast = random_tree(rng, int(rng.integers(1, 9)))
    return ast, model


class TestCliques:
    def test_seven_node_tree(self):
        cliques = build_clique_graph(seven_node_tree())
        nodes = [c.members for c in cliques if c.kind is CliqueKind.NODE]
        pc = {c.members for c in cliques if c.relation == "PC"}
        sib = {c.members for c in cliques if c.relation == "IS"}
        tri = {c.members for c in cliques if c.kind is CliqueKind.TRIANGLE}
        assert nodes == [(i,) for i in range(1, 8)]
        assert pc == {(1, 2), (1, 3), (3, 4), (3, 7), (4, 5), (4, 6)}
        assert sib == {(2, 3), (4, 7), (5, 6)}
        assert tri == {(1, 2, 3), (3, 4, 7), (4, 5, 6)}

    @pytest.mark.parametrize("size", [1, 2, 3, 8, 20])
    def test_junction_tree_valid(self, size):
        for seed in range(10):
            ast = random_tree(np.random.default_rng(seed), size)
            jt = build_junction_tree(build_clique_graph(ast))
            jt.verify()
            covered = set().union(*map(set, jt.cliques))
            assert covered == set(ast.positions())

    def test_every_clique_inside_a_maximal_one(self):
        ast = random_tree(np.random.default_rng(3), 15)
        jt = build_junction_tree(build_clique_graph(ast))
        for cl in build_clique_graph(ast):
            assert any(set(cl.members) <= set(m) for m in jt.cliques)


class TestExactness:
    @pytest.mark.parametrize("seed", range(25))
    def test_matches_brute_force(self, seed):
        ast, model = instance(seed)
        bf = brute_force_inference(ast, model)
        log_z, marg = log_partition_and_marginals(ast, model)
        assert abs(log_z - bf.log_z) < 1e-9
        for cl, dist in marg.items():
            for assign, p in dist.items():
                assert abs(p - bf.marginals[cl][assign]) < 1e-9
            # assignments outside the node domains carry no mass
            missing = set(bf.marginals[cl]) - set(dist)
            assert all(bf.marginals[cl][a] < 1e-12 for a in missing)

    @pytest.mark.parametrize("seed", range(25))
    def test_top_k_matches_brute_force(self, seed):
        ast, model = instance(seed)
        bf = brute_force_inference(ast, model, limit=5)
        got = top_k(ast, model, 5)
        assert [tuple(lab[p] for p in ast.positions()) for lab, _ in got] == \
            [names for names, _, _ in bf.ranked]
        for (_, p), (_, _, q) in zip(got, bf.ranked):
            assert abs(p - q) < 1e-9

    def test_single_node_closed_form(self):
        ast = Ast(Node("Literal", "1"))
        data = [TransformLabeling(ast, {1: "Constant-Rep"}), TransformLabeling(ast, {})]
        vocab = build_vocabulary(data, observation=False)
        w = np.zeros(len(vocab))
        w[vocab.index[("node", "Constant-Rep", "Literal")]] = 1.5
        w[vocab.index[("node", EMPTY, "Literal")]] = -0.5
        model = Model(vocab, w, build_admissible_sets(data))
        log_z, _ = log_partition_and_marginals(ast, model)
        assert log_z == pytest.approx(math.log(math.exp(1.5) + math.exp(-0.5)), abs=1e-12)
        ranked = top_k(ast, model, 3)
        assert [lab[1] for lab, _ in ranked] == ["Constant-Rep", EMPTY]
        assert ranked[0][1] == pytest.approx(1 / (1 + math.exp(-2.0)), abs=1e-12)


class TestRanking:
    def test_zero_weights_give_all_empty(self):
        ast, model = instance(7)
        lab = map_assignment(ast, model.with_weights(np.zeros(model.n_features)))
        assert lab.labels == {}

    def test_k1_is_map(self):
        ast, model = instance(11)
        assert top_k(ast, model, 1)[0][0] == map_assignment(ast, model)

    def test_fewer_than_k(self):
        ast = Ast(Node("Literal", "1"))
        data = [TransformLabeling(ast, {1: "Constant-Rep"})]
        model = Model(build_vocabulary(data), np.zeros(len(build_vocabulary(data))),
                      build_admissible_sets(data))
        assert len(top_k(ast, model, 10)) == 2

    def test_invalid_k(self):
        ast, model = instance(0)
        with pytest.raises(ValueError):
            top_k(ast, model, 0)

    def test_brute_force_refuses_large(self):
        ast, model = instance(1)
        with pytest.raises(InferenceError):
            brute_force_inference(random_tree(np.random.default_rng(0), 40), model,
                                  max_assignments=1000)


class TestConstraints:
    def model(self):
        ast = Ast(Node("Return", None, [Node("Literal", "1")]))
        data = [TransformLabeling(ast, {2: "Constant-Rep"}),
                TransformLabeling(Ast(Node("Block", None, [Node("Return")])), {1: "Wrap-TRY"})]
        vocab = build_vocabulary(data)
        return ast, Model(vocab, np.zeros(len(vocab)), build_admissible_sets(data))

    def test_unseen_pair_has_zero_probability(self):
        ast, model = self.model()
        # Wrap-TRY is never seen on a Return node
        assert score_assignment(ast, {1: "Wrap-TRY"}, model) == -math.inf
        names = [tuple(lab[p] for p in ast.positions()) for lab, _ in top_k(ast, model, 10)]
        assert names == [(EMPTY, EMPTY), (EMPTY, "Constant-Rep")]

    def test_admissible_sets(self):
        _, model = self.model()
        adm = model.admissible
        assert adm.node_violates("Literal", "Wrap-TRY")
        assert not adm.node_violates("Literal", "Constant-Rep")
        assert not adm.edge_violates("Return", "Literal", EMPTY, "Constant-Rep")
        assert adm.edge_violates("Return", "Literal", "Constant-Rep", "Constant-Rep")
        assert not adm.edge_violates("Return", "Literal", EMPTY, EMPTY)
        assert adm.node_domain("Literal") == (EMPTY, "Constant-Rep")
        assert adm.node_domain("If") is None

    def test_empty_always_admissible(self):
        ast = Ast(Node("Literal", "1"))
        vocab = build_vocabulary([TransformLabeling(ast, {})])
        adm = AdmissibleSets({"Literal": frozenset({"Constant-Rep"})})
        # EMPTY stays admissible even when the set omits it
        model = Model(vocab, np.zeros(len(vocab)), adm)
        assert len(top_k(ast, model, 5)) == 2


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_top_k_probabilities_non_increasing(seed):
    ast, model = instance(seed)
    probs = [p for _, p in top_k(ast, model, 6)]
    assert all(a >= b - 1e-12 for a, b in zip(probs, probs[1:]))
    assert sum(probs) <= 1 + 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), shift=st.floats(-3, 3))
def test_map_invariant_to_constant_shift(seed, shift):
    # raising the root's node indicator for every admissible transform adds
    # the same constant to every assignment
    ast, model = instance(seed)
    label = ast.node(1).label
    domain = model.admissible.node_domain(label) or (EMPTY,)
    fids = [model.vocab.index.get(("node", t, label)) for t in domain]
    if None in fids:
        return
    w = model.weights.copy()
    w[fids] += shift
    assert map_assignment(ast, model.with_weights(w)) == map_assignment(ast, model)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_marginals_are_distributions(seed):
    ast, model = instance(seed)
    _, marg = log_partition_and_marginals(ast, model)
    for dist in marg.values():
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)
        assert min(dist.values()) >= -1e-15
