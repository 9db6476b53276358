import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import eq2_scores_oracle, greedy_dag_oracle, has_topological_order
from ragcausal.causal import (
    CausalGraph,
    ChunkVerdict,
    EdgeCandidate,
    aggregate_candidates,
    build_dag,
    creates_cycle,
    discover_network,
    mean_token_probability,
    query_node,
    read_candidates_csv,
    read_graph_json,
    write_candidates_csv,
    write_graph_json,
)
from ragcausal.config import PipelineConfig
from ragcausal.corpus import load_corpus
from ragcausal.errors import QueryError
from ragcausal.nodes import ALL_NODES, NodeLabel
from ragcausal.providers import (
    GenerationRecord,
    GenerationRequest,
    HashEmbedder,
    ScriptedGenerator,
)
from ragcausal.retrieval import ScoredChunk
from ragcausal.corpus import Chunk

A, B, C, D, E, F, G = ALL_NODES


def sc(text, rank=0):
    return ScoredChunk(
        chunk=Chunk(doc_id="d1", seq_index=rank, text=text, token_count=2),
        similarity=0.9,
    )


def verdict(causes, u_c, rank=0):
    return ChunkVerdict(chunk_rank=rank, causes=frozenset(causes), u_c=u_c)


def cand(cause, effect, score, support=1, retrieved=1):
    return EdgeCandidate(cause=cause, effect=effect, score=score,
                         support=support, retrieved=retrieved)


# --- mean_token_probability ------------------------------------------------


def test_mean_all_ones():
    record = GenerationRecord(text="ab", tokens=(("a", 1.0), ("b", 1.0)))
    assert mean_token_probability(record) == 1.0


def test_mean_direct():
    record = GenerationRecord(text="abc", tokens=(("a", 0.5), ("b", 0.7), ("c", 0.9)))
    assert mean_token_probability(record) == pytest.approx(0.7, abs=1e-15)


def test_mean_single_token():
    record = GenerationRecord(text="x", tokens=(("x", 0.3),))
    assert mean_token_probability(record) == 0.3


# --- query_node ------------------------------------------------------------


def scripted(pattern, text, p):
    from ragcausal.providers import GenerationRule

    return GenerationRule(pattern=pattern, text=text, token_probs=((text, p),))


def test_query_node_split_one_verdict_per_chunk():
    gen = ScriptedGenerator(
        rules=[scripted("directly cause", "<Answer>A</Answer>", 0.8)]
    )
    retrieved = [sc(f"chunk {i}", i) for i in range(10)]
    verdicts = query_node(E, retrieved, "split", gen)
    assert len(verdicts) == 10
    assert [v.chunk_rank for v in verdicts] == list(range(10))
    assert all(v.causes == frozenset({A}) for v in verdicts)
    assert all(v.u_c == 0.8 for v in verdicts)
    assert gen.calls == 10


def test_query_node_concat_single_verdict_with_all_chunks():
    seen_prompts = []

    class SpyGen:
        def generate(self, request):
            seen_prompts.append(request.prompt)
            return GenerationRecord(text="<Answer>C</Answer>",
                                     tokens=(("<Answer>C</Answer>", 0.9),))

    verdicts = query_node(E, [sc("alpha", 0), sc("beta", 1), sc("gamma", 2)],
                          "concat", SpyGen())
    assert len(verdicts) == 1
    for text in ("alpha", "beta", "gamma"):
        assert text in seen_prompts[0]


def test_query_node_base_has_no_context():
    seen = []

    class SpyGen:
        def generate(self, request):
            seen.append(request.prompt)
            return GenerationRecord(text="<Answer></Answer>",
                                     tokens=(("<Answer></Answer>", 1.0),))

    verdicts = query_node(E, [], "base", SpyGen())
    assert len(verdicts) == 1
    assert "Context:" not in seen[0]
    assert verdicts[0].causes == frozenset()


def test_query_node_partial_failure_records_abstention(caplog):
    class FlakyGen:
        def __init__(self):
            self.n = 0

        def generate(self, request):
            self.n += 1
            if self.n == 2:
                raise RuntimeError("transport down")
            return GenerationRecord(text="<Answer>A</Answer>",
                                     tokens=(("<Answer>A</Answer>", 0.6),))

    with caplog.at_level("ERROR"):
        verdicts = query_node(E, [sc("x", 0), sc("y", 1), sc("z", 2)],
                              "split", FlakyGen())
    assert len(verdicts) == 3
    assert verdicts[1].causes == frozenset() and verdicts[1].u_c == 1.0


def test_query_node_all_failures_raise():
    class DeadGen:
        def generate(self, request):
            raise RuntimeError("down")

    with pytest.raises(QueryError):
        query_node(E, [sc("x")], "split", DeadGen())


def test_query_node_strategy_preconditions():
    gen = ScriptedGenerator()
    with pytest.raises(ValueError):
        query_node(E, [], "split", gen)
    with pytest.raises(ValueError):
        query_node(E, [], "nope", gen)


# --- aggregate_candidates --------------------------------------------------


def test_aggregate_worked_example():
    verdicts = [verdict({A}, u, i) for i, u in enumerate([0.9, 0.8, 0.7])]
    verdicts += [verdict(set(), 1.0, i) for i in range(3, 10)]
    [candidate] = aggregate_candidates(E, verdicts)
    assert candidate.score == 0.24
    assert candidate.support == 3 and candidate.retrieved == 10


def test_aggregate_maximal_support():
    verdicts = [verdict({A}, 1.0, i) for i in range(5)]
    [candidate] = aggregate_candidates(E, verdicts)
    assert candidate.score == 1.0


def test_aggregate_absent_cause_not_emitted():
    verdicts = [verdict({A}, 0.9)]
    causes = {c.cause for c in aggregate_candidates(E, verdicts)}
    assert B not in causes


def test_aggregate_min_support_drops():
    verdicts = [verdict({A}, 0.9, i) for i in range(3)]
    verdicts += [verdict(set(), 1.0, i) for i in range(3, 10)]
    assert aggregate_candidates(E, verdicts, min_support=6) == []


def test_aggregate_support_denominator_switch():
    verdicts = [verdict({A}, u, i) for i, u in enumerate([0.9, 0.8, 0.7])]
    verdicts += [verdict(set(), 1.0, i) for i in range(3, 10)]
    [candidate] = aggregate_candidates(E, verdicts, denominator="support")
    assert candidate.score == pytest.approx(0.8, abs=1e-12)


def test_aggregate_sorted_by_score_then_letter():
    verdicts = [verdict({A, C}, 0.6), verdict({C}, 0.9, 1)]
    candidates = aggregate_candidates(E, verdicts)
    assert [c.cause for c in candidates] == [C, A]


def test_aggregate_rejects_empty():
    with pytest.raises(ValueError):
        aggregate_candidates(E, [])


@settings(max_examples=100)
@given(
    st.lists(
        st.tuples(
            st.sets(st.sampled_from([A, B, C, D, F, G]), max_size=6),
            st.floats(min_value=0.01, max_value=1.0),
        ),
        min_size=1,
        max_size=15,
    )
)
def test_aggregate_matches_oracle(raw):
    verdicts = [verdict(causes, u, i) for i, (causes, u) in enumerate(raw)]
    expected = eq2_scores_oracle(verdicts)
    got = {c.cause: c.score for c in aggregate_candidates(E, verdicts)}
    assert set(got) == set(expected)
    for cause, score in expected.items():
        assert abs(got[cause] - score) <= 1e-12


def test_score_monotone_in_support():
    base = [verdict({A}, 0.5, 0), verdict(set(), 1.0, 1), verdict(set(), 1.0, 2)]
    more = [verdict({A}, 0.5, 0), verdict({A}, 0.2, 1), verdict(set(), 1.0, 2)]
    [low] = aggregate_candidates(E, base)
    [high] = aggregate_candidates(E, more)
    assert high.score > low.score


# --- creates_cycle / build_dag ---------------------------------------------


def test_no_cycle_in_empty_graph():
    assert creates_cycle(CausalGraph(), A, B) is False


def test_two_cycle_detected():
    graph = CausalGraph([cand(A, B, 0.9)])
    assert creates_cycle(graph, B, A) is True


def test_longer_cycle_detected():
    graph = CausalGraph([cand(A, B, 0.9), cand(B, C, 0.8)])
    assert creates_cycle(graph, C, A) is True
    assert creates_cycle(graph, A, C) is False


def test_creates_cycle_rejects_self_loop():
    with pytest.raises(ValueError):
        creates_cycle(CausalGraph(), A, A)


def test_build_dag_trace():
    candidates = [cand(A, B, 0.9), cand(B, A, 0.8), cand(B, C, 0.7)]
    graph = build_dag(candidates)
    assert graph.edge_pairs() == {(A, B), (B, C)}


def test_build_dag_keeps_acyclic_input():
    candidates = [cand(A, B, 0.9), cand(B, C, 0.8), cand(A, C, 0.7)]
    graph = build_dag(candidates)
    assert graph.edge_pairs() == {(A, B), (B, C), (A, C)}


def test_build_dag_empty():
    graph = build_dag([])
    assert len(graph.nodes) == 7 and graph.edges == ()


def test_build_dag_rejects_duplicates():
    with pytest.raises(ValueError):
        build_dag([cand(A, B, 0.9), cand(A, B, 0.5)])


def test_self_loop_candidate_rejected_at_construction():
    with pytest.raises(ValueError):
        cand(A, A, 0.5)


@settings(max_examples=150, deadline=None)
@given(st.randoms(use_true_random=False))
def test_build_dag_matches_oracle_and_is_acyclic(rnd):
    pairs = [(u, v) for u in ALL_NODES for v in ALL_NODES if u is not v]
    chosen = rnd.sample(pairs, rnd.randint(0, len(pairs)))
    candidates = [cand(u, v, rnd.random()) for u, v in chosen]
    graph = build_dag(candidates)
    got = {(e.cause.letter, e.effect.letter) for e in graph.edges}
    assert got == greedy_dag_oracle(candidates)
    assert has_topological_order(got)


@settings(max_examples=50, deadline=None)
@given(st.randoms(use_true_random=False))
def test_build_dag_permutation_invariant(rnd):
    pairs = [(u, v) for u in ALL_NODES for v in ALL_NODES if u is not v]
    chosen = rnd.sample(pairs, rnd.randint(1, 20))
    candidates = [cand(u, v, rnd.choice([0.2, 0.5, 0.5, 0.9])) for u, v in chosen]
    baseline = build_dag(candidates).edge_pairs()
    shuffled = list(candidates)
    rnd.shuffle(shuffled)
    assert build_dag(shuffled).edge_pairs() == baseline


def test_retained_edge_outranks_what_it_excluded():
    candidates = [cand(A, B, 0.9), cand(B, C, 0.8), cand(C, A, 0.7)]
    graph = build_dag(candidates)
    kept_scores = {e.score for e in graph.edges}
    assert (C, A) not in graph.edge_pairs()
    assert min(kept_scores) >= 0.7


# --- discover_network ------------------------------------------------------


def make_config(fixture_corpus_args, **kwargs):
    defaults = dict(
        manifest=fixture_corpus_args["manifest"],
        text_dir=fixture_corpus_args["text_dir"],
        strategy="split",
        k=10,
        seed=0,
    )
    defaults.update(kwargs)
    return PipelineConfig(**defaults)


def test_discover_split_issues_nodes_times_k_generations(fixture_corpus_args):
    config = make_config(fixture_corpus_args)
    corpus = load_corpus(config.manifest, config.text_dir)
    gen = ScriptedGenerator.from_fixture(fixture_corpus_args["generation_fixture"])
    result = discover_network(corpus, config, HashEmbedder(seed=0), gen)
    assert gen.calls == 7 * 10
    assert len(result.reasoning_records) == 70
    assert has_topological_order(
        {(e.cause.letter, e.effect.letter) for e in result.graph.edges}
    )


def test_discover_base_issues_seven_generations(fixture_corpus_args):
    config = make_config(fixture_corpus_args, strategy="base")
    corpus = load_corpus(config.manifest, config.text_dir)

    class CountingEmbedder(HashEmbedder):
        def __init__(self):
            super().__init__()
            self.calls = 0

        def embed(self, texts):
            self.calls += 1
            return super().embed(texts)

    embedder = CountingEmbedder()
    gen = ScriptedGenerator.from_fixture(fixture_corpus_args["generation_fixture"])
    result = discover_network(corpus, config, embedder, gen)
    assert gen.calls == 7
    assert embedder.calls == 0
    assert len(result.reasoning_records) == 7


def test_discover_deterministic(fixture_corpus_args):
    config = make_config(fixture_corpus_args)
    corpus = load_corpus(config.manifest, config.text_dir)
    results = []
    for _ in range(2):
        gen = ScriptedGenerator.from_fixture(fixture_corpus_args["generation_fixture"])
        results.append(discover_network(corpus, config, HashEmbedder(seed=0), gen))
    assert results[0].graph.to_json_dict() == results[1].graph.to_json_dict()
    assert results[0].reasoning_records == results[1].reasoning_records


# --- serialization ---------------------------------------------------------


def test_graph_json_roundtrip(tmp_path):
    graph = build_dag([cand(A, B, 0.875, 3, 10), cand(B, C, 0.5, 1, 10)])
    path = tmp_path / "graph.json"
    write_graph_json(graph, path)
    loaded = read_graph_json(path)
    assert loaded.to_json_dict() == graph.to_json_dict()


def test_candidates_csv_roundtrip(tmp_path):
    candidates = [cand(A, B, 1 / 3, 2, 10), cand(C, E, 0.24, 3, 10)]
    path = tmp_path / "candidates.csv"
    write_candidates_csv(candidates, path)
    assert read_candidates_csv(path) == candidates


def test_dot_output_format():
    graph = build_dag([cand(A, E, 0.87654)])
    dot = graph.to_dot()
    assert "digraph" in dot
    assert 'A -> E [score="0.8765"];' in dot
    assert 'label="amyloid beta"' in dot
