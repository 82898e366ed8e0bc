import io
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arctraj.analytics.intention import cluster_intentions, extract_intentions
from arctraj.engine import ActionRequest
from arctraj.export import (
    DTSample,
    ExportError,
    MissingIntentionIndex,
    NoOperationsWarning,
    SinkUnwritable,
    UnresolvedAction,
    build_intention_index,
    read_dt_jsonl,
    read_markov_jsonl,
    to_dt_tuples,
    to_markov_pairs,
    verify_sample,
    write_jsonl,
)
from arctraj.grid import make_grid
from arctraj.replay import replay
from synth import make_task, random_walk, record_script, solve_task


def sel(r, c):
    return ActionRequest("SelectCell", position=(r, c))


@pytest.fixture
def paint_task():
    return make_task([[0, 0], [0, 0]], [[3, 0], [0, 0]])


@pytest.fixture
def paint_replay(paint_task):
    t = record_script(
        paint_task,
        [sel(0, 0), ActionRequest("Paint", color=3), ActionRequest("Submit")],
    )
    return replay(t, paint_task)


class TestMarkovPairs:
    def test_selection_folds_into_object(self, paint_task):
        t = record_script(paint_task, [sel(0, 0), ActionRequest("Paint", color=3)])
        samples = to_markov_pairs(replay(t, paint_task))
        assert len(samples) == 1
        assert samples[0].object_cells == {(0, 0)}
        assert samples[0].operation.operation == "Paint"
        assert samples[0].operation.color == 3
        assert samples[0].next_grid == make_grid([[3, 0], [0, 0]])
        # the painted grid already matches the target
        assert samples[0].reward == 1

    def test_terminal_reward_on_submit(self, paint_replay):
        samples = to_markov_pairs(paint_replay)
        assert [s.reward for s in samples] == [0, 1]
        assert [s.operation.operation for s in samples] == ["Paint", "Submit"]

    def test_failed_trajectory_all_zero(self, paint_task):
        t = record_script(
            paint_task,
            [sel(0, 0), ActionRequest("Paint", color=9), ActionRequest("Submit")],
        )
        samples = to_markov_pairs(replay(t, paint_task))
        assert all(s.reward == 0 for s in samples)

    def test_only_selections_warns_empty(self, paint_task):
        t = record_script(paint_task, [sel(0, 0), sel(1, 1)])
        with pytest.warns(NoOperationsWarning):
            assert to_markov_pairs(replay(t, paint_task)) == ()

    def test_history_dropped_but_applied(self, paint_task):
        t = record_script(
            paint_task,
            [
                sel(0, 0),
                ActionRequest("Paint", color=9),
                ActionRequest("Undo"),
                ActionRequest("Paint", color=3),
            ],
        )
        samples = to_markov_pairs(replay(t, paint_task))
        assert [s.operation.operation for s in samples] == ["Paint", "Paint"]
        # the undo restored the blank grid before the second paint
        assert samples[1].grid == make_grid([[0, 0], [0, 0]])

    def test_every_sample_verifies(self, paint_replay):
        for s in to_markov_pairs(paint_replay):
            assert verify_sample(s)

    def test_paste_samples_verify_via_clipboard_context(self):
        task = make_task([[5, 0], [0, 0]], [[5, 0], [0, 5]])
        t = record_script(
            task,
            [
                sel(0, 0),
                ActionRequest("Copy"),
                ActionRequest("SelectGrid", cells=frozenset({(1, 1)})),
                ActionRequest("Paste"),
                ActionRequest("Submit"),
            ],
        )
        r = replay(t, task)
        samples = to_markov_pairs(r)
        assert [s.operation.operation for s in samples] == ["Copy", "Paste", "Submit"]
        assert samples[1].next_grid == make_grid([[5, 0], [0, 5]])

    def test_divergent_frame_raises(self, paint_task):
        import dataclasses

        t = record_script(
            paint_task,
            [sel(0, 0), ActionRequest("Paint", color=3), ActionRequest("Submit")],
        )
        # corrupt the Paint snapshot so resync adopts a grid the engine
        # cannot reproduce
        actions = list(t.actions)
        actions[1] = dataclasses.replace(actions[1], grid=make_grid([[9, 9], [9, 9]]))
        broken = dataclasses.replace(t, actions=tuple(actions))
        r = replay(broken, paint_task)
        assert r.divergences
        with pytest.raises(UnresolvedAction) as exc:
            to_markov_pairs(r)
        assert exc.value.index == 1


class TestDTTuples:
    def test_success_rtg_all_ones(self, paint_replay):
        samples = to_dt_tuples(paint_replay, "triple")
        assert [s.return_to_go for s in samples] == [1, 1]
        assert [s.t for s in samples] == [0, 1]
        assert [s.action for s in samples] == ["Paint", "Submit"]

    def test_three_step_success(self):
        task = make_task([[0, 0]], [[3, 4]])
        t = record_script(
            task,
            [
                sel(0, 0),
                ActionRequest("Paint", color=3),
                sel(0, 1),
                ActionRequest("Paint", color=4),
                ActionRequest("Submit"),
            ],
        )
        samples = to_dt_tuples(replay(t, task), "triple")
        assert [s.return_to_go for s in samples] == [1, 1, 1]

    def test_failure_rtg_all_zero(self, paint_task):
        t = record_script(
            paint_task,
            [sel(0, 0), ActionRequest("Paint", color=9), ActionRequest("Submit")],
        )
        samples = to_dt_tuples(replay(t, paint_task), "triple")
        assert [s.return_to_go for s in samples] == [0, 0]

    def test_triple_omits_object(self, paint_replay):
        samples = to_dt_tuples(paint_replay, "triple")
        assert all(s.object_cells is None for s in samples)
        assert all("object" not in s.to_json() for s in samples)

    def test_quadruple_includes_object(self, paint_replay):
        samples = to_dt_tuples(paint_replay, "quadruple")
        assert samples[0].object_cells == {(0, 0)}
        assert samples[0].to_json()["object"] == [[0, 0]]

    def test_pentuple_requires_index(self, paint_replay):
        with pytest.raises(MissingIntentionIndex):
            to_dt_tuples(paint_replay, "pentuple")

    def test_pentuple_attaches_cluster_ids(self, paint_task):
        t = record_script(
            paint_task,
            [sel(0, 0), ActionRequest("Paint", color=3), ActionRequest("Submit")],
        )
        instances = extract_intentions(t)
        index = build_intention_index(cluster_intentions(instances, tau=0.5))
        samples = to_dt_tuples(replay(t, paint_task), "pentuple", index)
        assert samples[0].intention is not None
        assert samples[0].intention in index.values()

    def test_unknown_variant(self, paint_replay):
        with pytest.raises(ExportError):
            to_dt_tuples(paint_replay, "sextuple")

    def test_rtg_non_increasing_and_terminal(self, paint_replay):
        samples = to_dt_tuples(paint_replay, "triple")
        rtgs = [s.return_to_go for s in samples]
        assert rtgs == sorted(rtgs, reverse=True)
        final_reward = to_markov_pairs(paint_replay)[-1].reward
        assert rtgs[-1] == final_reward


class TestJsonl:
    def test_empty_zero_lines(self, tmp_path):
        path = tmp_path / "out.jsonl"
        assert write_jsonl([], path) == 0
        assert path.read_text() == ""

    def test_two_samples_two_lines(self, paint_replay, tmp_path):
        path = tmp_path / "markov.jsonl"
        samples = to_markov_pairs(paint_replay)
        assert write_jsonl(samples, path) == 2
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        for line in lines:
            doc = json.loads(line)
            assert set(doc) == {"grid", "object", "operation", "next_grid", "reward"}

    def test_file_object_sink(self, paint_replay):
        buf = io.StringIO()
        n = write_jsonl(to_markov_pairs(paint_replay), buf)
        assert n == 2
        assert len(buf.getvalue().splitlines()) == 2

    def test_unwritable_sink(self, paint_replay, tmp_path):
        with pytest.raises(SinkUnwritable):
            write_jsonl(to_markov_pairs(paint_replay), tmp_path / "no" / "dir.jsonl")

    def test_markov_round_trip_lossless(self, paint_replay, tmp_path):
        path = tmp_path / "markov.jsonl"
        samples = to_markov_pairs(paint_replay)
        write_jsonl(samples, path)
        back = read_markov_jsonl(path)
        assert back == samples

    def test_round_trip_reverifies(self, paint_replay, tmp_path):
        path = tmp_path / "markov.jsonl"
        write_jsonl(to_markov_pairs(paint_replay), path)
        for sample in read_markov_jsonl(path):
            if sample.operation.operation != "Paste":
                assert verify_sample(sample)

    def test_dt_round_trip_lossless(self, paint_replay, tmp_path):
        for variant in ("triple", "quadruple"):
            path = tmp_path / f"{variant}.jsonl"
            samples = to_dt_tuples(paint_replay, variant)
            write_jsonl(samples, path)
            assert read_dt_jsonl(path) == samples

    def test_dt_field_names(self, paint_replay):
        doc = to_dt_tuples(paint_replay, "quadruple")[0].to_json()
        assert set(doc) == {"rtg", "state", "action", "t", "object"}


@pytest.mark.properties
class TestMarkovSoundness:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_random_walks_export_verified(self, seed):
        task = make_task([[0, 1], [2, 0]], [[0, 1], [2, 3]])
        t = random_walk(task, random.Random(seed), steps=10)
        r = replay(t, task)
        assert not r.divergences
        # emission re-verifies every sample or raises; reward is terminal-only
        samples = to_markov_pairs(r)
        rewards = [s.reward for s in samples]
        assert all(rw in (0, 1) for rw in rewards)
        assert sum(rewards) <= 1

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15, deadline=None)
    def test_solver_exports_with_terminal_reward(self, seed):
        rng = random.Random(seed)
        rows = [[rng.randrange(4) for _ in range(2)] for _ in range(2)]
        task = make_task([[0, 0], [0, 0]], rows)
        t = solve_task(task)
        samples = to_markov_pairs(replay(t, task))
        assert samples[-1].reward == 1
        assert all(s.reward == 0 for s in samples[:-1])
