import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from astcrf.edits import (ADD, DEL, MOV, UPD, EditOp, EditScript, EditScriptError,
                          apply_edit_script, count_root_edit_ops, diff_naive,
                          edit_script_from_obj, filter_by_root_ops, is_isomorphic,
                          load_edit_script, normalize_ops, parse_edit_script,
                          verify_edit_script)
from astcrf.testing import random_tree
from astcrf.trees import Ast, Node, ast_to_obj


def small() -> Ast:
    # a + foo(b): BinaryOperator1, VariableAccess2, MethodCall3, VariableAccess4
    return Ast(Node("BinaryOperator", "+", [
        Node("VariableAccess", "a"),
        Node("MethodCall", "foo", [Node("VariableAccess", "b")])]))


class TestEditOp:
    @pytest.mark.parametrize("make", [
        lambda: EditOp("XXX", 1),
        lambda: EditOp("UPD", 1),
        lambda: EditOp("DEL", 1, 2, 1),
        lambda: EditOp("MOV", 1, 2),
        lambda: EditOp("ADD", "n", 1, None, label="Literal"),
        lambda: EditOp("ADD", "n", 1, 1),
        lambda: EditOp("MOV", 1, 2, 0),
    ])
    def test_invalid(self, make):
        with pytest.raises(EditScriptError):
            make()

    def test_normalize_order(self):
        ops = [ADD("n", 1, 1, "Literal"), UPD(2, "x"), MOV(4, 1, 2), DEL(3)]
        assert [op.kind for op in normalize_ops(ops)] == ["DEL", "MOV", "UPD", "ADD"]


class TestApply:
    def test_update(self):
        out = apply_edit_script(small(), [UPD(2, "c")])
        assert out.node(2).value == "c"

    def test_unwrap_call(self):
        out = apply_edit_script(small(), [DEL(3), MOV(4, 1, 2)])
        assert out.labels() == ["BinaryOperator", "VariableAccess", "VariableAccess"]
        assert out.node(3).value == "b"

    def test_wrap_in_new_node(self):
        out = apply_edit_script(small(), [ADD("m", 1, 1, "MethodCall", "abs"), MOV(2, "m", 1)])
        assert [(n.label, n.value) for n in out.nodes][:3] == [
            ("BinaryOperator", "+"), ("MethodCall", "abs"), ("VariableAccess", "a")]

    def test_order_independent(self):
        ops = [ADD("m", 1, 1, "MethodCall", "abs"), MOV(2, "m", 1), UPD(4, "z")]
        a = apply_edit_script(small(), ops)
        b = apply_edit_script(small(), list(reversed(ops)))
        assert is_isomorphic(a, b)

    def test_new_root(self):
        out = apply_edit_script(small(), [ADD("r", None, None, "Return"), MOV(1, "r", 1)])
        assert out.labels()[0] == "Return"

    @pytest.mark.parametrize("ops, needle", [
        ([DEL(3)], "non-leaf"),
        ([DEL(2), UPD(2, "x")], "deleted and also edited"),
        ([MOV(2, 3, 5)], "invalid index"),
        ([MOV(1, 4, 1)], "roots|under itself|cycle"),
        ([MOV(2, 3, 1), MOV(4, 1, 2), ADD("n", 1, 2, "Literal")], "claimed twice"),
        ([UPD(9, "x")], "dangling"),
        ([ADD("n", "zz", 1, "Literal")], "dangling parent"),
        ([DEL(1), DEL(2), DEL(3), DEL(4)], "0 roots"),
    ])
    def test_invalid(self, ops, needle):
        with pytest.raises(EditScriptError, match=needle):
            apply_edit_script(small(), ops)


class TestDocuments:
    def test_parse_ops(self):
        text = json.dumps({"ops": [{"kind": "UPD", "node": 2, "new_value": "c"},
                                   {"kind": "ADD", "node": "n", "parent": 1, "index": 3,
                                    "label": "Literal", "value": "1"}]})
        script = parse_edit_script(text, small())
        assert [op.kind for op in script.ops] == ["UPD", "ADD"]

    @pytest.mark.parametrize("doc, needle", [
        ('{"ops": [', "line"),
        ('{"ops": 3}', "'ops' list"),
        ('{"ops": [{"kind": "UPD"}]}', "'kind' and 'node'"),
        ('{"ops": [{"kind": "ADD", "node": "n", "parent": 1, "label": "Literal"}]}', "index"),
        ('{"ops": [{"kind": "ADD", "node": "n", "parent": 1, "index": 1, "label": "Bogus"}]}',
         "label set"),
        ('{"ops": [{"kind": "DEL", "node": 17}]}', "dangling"),
        ('{"ops": [{"kind": "ADD", "node": 5, "parent": 1, "index": 1, "label": "Literal"}]}',
         "fresh"),
    ])
    def test_parse_errors(self, doc, needle):
        with pytest.raises(EditScriptError, match=needle):
            parse_edit_script(doc, small())

    def test_load_with_tree_files(self, tmp_path):
        before = small()
        after = apply_edit_script(before, [UPD(2, "c")])
        (tmp_path / "b.json").write_text(json.dumps(ast_to_obj(before)))
        (tmp_path / "a.json").write_text(json.dumps(ast_to_obj(after)))
        (tmp_path / "s.json").write_text(json.dumps(
            {"before": "b.json", "after": "a.json",
             "ops": [{"kind": "UPD", "node": 2, "new_value": "c"}]}))
        script = load_edit_script(tmp_path / "s.json")
        assert verify_edit_script(script)
        assert script.source_id.endswith("b.json")

    def test_inline_round_trip(self):
        before = small()
        ops = [DEL(3), MOV(4, 1, 2)]
        script = EditScript(before, apply_edit_script(before, ops), ops, "x")
        again = edit_script_from_obj(json.loads(json.dumps(script.to_obj())))
        assert again.ops == ops
        assert verify_edit_script(again)


class TestRootOps:
    def test_count(self):
        ops = [UPD(2, "c"), DEL(4), ADD("m", 1, 3, "MethodCall"), ADD("k", "m", 1, "Literal"),
               MOV(2, "m", 2)]
        assert count_root_edit_ops(EditScript(small(), None, ops)) == 3

    def test_new_root_counts(self):
        ops = [ADD("r", None, None, "Return"), MOV(1, "r", 1)]
        assert count_root_edit_ops(EditScript(small(), None, ops)) == 1

    def test_filter(self):
        s1 = EditScript(small(), None, [UPD(2, "c")])
        s2 = EditScript(small(), None, [UPD(2, "c"), UPD(4, "d")])
        assert filter_by_root_ops([s1, s2], 1) == [s1]
        with pytest.raises(ValueError):
            filter_by_root_ops([s1], 0)


def mutate(rng, ast: Ast) -> Ast:
    out = ast.copy()
    for node in out.nodes:
        r = rng.random()
        if r < 0.2:
            node.value = "changed"
        elif r < 0.3:
            node.children.append(Node("Literal", "new"))
    nodes = [n for n in out.nodes if n is not out.root]
    for node in nodes:
        if node.children == [] and rng.random() < 0.15:
            par = next(p for p in out.nodes if node in p.children)
            par.children.remove(node)
    return Ast(out.root)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**31), size=st.integers(1, 15))
def test_diff_then_apply_reproduces_after(seed, size):
    rng = np.random.default_rng(seed)
    before = random_tree(rng, size)
    after = mutate(rng, before)
    script = diff_naive(before, after)
    assert verify_edit_script(script)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), size=st.integers(1, 15))
def test_empty_script_is_identity(seed, size):
    before = random_tree(np.random.default_rng(seed), size)
    assert is_isomorphic(apply_edit_script(before, []), before)
