import json

import numpy as np
import pytest

from logofuse.store import (
    DatasetManifest,
    LogoRecord,
    ManifestError,
    SyntheticSpec,
    build_annotations,
    generate_synthetic_corpus,
    load_groups,
    load_manifest,
    save_manifest,
    split_train_test,
)
from logofuse.taxonomy import CharacteristicKind as K, build_label_spaces


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", "utf-8")


def record_line(i, vienna=("05.09.01",), nice=(1,), split="train"):
    return json.dumps(
        {"id": i, "path": f"img/{i}.png", "vienna": list(vienna), "nice": list(nice), "split": split}
    )


class TestLoadManifest:
    def test_three_valid_lines(self, tmp_path):
        p = tmp_path / "m.jsonl"
        write_lines(p, [record_line(i) for i in range(3)])
        manifest = load_manifest(p)
        assert len(manifest.records) == 3
        assert manifest.root == tmp_path
        assert not manifest.issues

    def test_out_of_range_category_reported(self, tmp_path):
        p = tmp_path / "m.jsonl"
        lines = [record_line(i) for i in range(9)] + [record_line(9, vienna=("31.01",))]
        write_lines(p, lines)
        manifest = load_manifest(p)
        assert len(manifest.records) == 9
        assert len(manifest.issues) == 1
        assert "category" in manifest.issues[0].message

    def test_grouping_of_loaded_codes(self, tmp_path):
        p = tmp_path / "m.jsonl"
        write_lines(p, [record_line(0, vienna=("05.09.01", "29.01.04"))])
        manifest = load_manifest(p)
        spaces = build_label_spaces()
        ann = build_annotations(manifest, spaces)[0]
        main = spaces.space(K.FIGURATIVE_MAIN)
        color = spaces.space(K.COLOR)
        assert {main.label(i).name for i in ann[K.FIGURATIVE_MAIN]} == {"Plants"}
        assert {color.label(i).name for i in ann[K.COLOR]} == {"Blue"}
        assert ann[K.SECTOR] == frozenset({0})

    def test_too_many_invalid_aborts(self, tmp_path):
        p = tmp_path / "m.jsonl"
        write_lines(p, [record_line(0), "not json", '{"id": -1}'])
        with pytest.raises(ManifestError) as err:
            load_manifest(p)
        assert len(err.value.issues) == 2

    def test_duplicate_ids_reported(self, tmp_path):
        p = tmp_path / "m.jsonl"
        write_lines(p, [record_line(i) for i in range(9)] + [record_line(8)])
        manifest = load_manifest(p)
        assert len(manifest.records) == 9
        assert "duplicate" in manifest.issues[0].message

    def test_unknown_field_rejected(self, tmp_path):
        p = tmp_path / "m.jsonl"
        bad = json.dumps(
            {"id": 0, "path": "x.png", "vienna": [], "nice": [], "split": "train", "extra": 1}
        )
        write_lines(p, [record_line(i) for i in range(9)] + [bad])
        manifest = load_manifest(p)
        assert "fields" in manifest.issues[0].message

    def test_missing_file(self, tmp_path):
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "absent.jsonl")


class TestRoundTrip:
    def test_save_load_identity(self, tmp_path):
        rng = np.random.default_rng(0)
        records = []
        for i in range(40):
            vienna = tuple(
                rng.choice(["01.01", "05.09.01", "26.04", "27", "29.01.08"], size=rng.integers(0, 3), replace=False)
            )
            nice = tuple(int(n) for n in rng.choice(45, size=rng.integers(0, 3), replace=False) + 1)
            records.append(
                LogoRecord(i, f"images/{i}.png", vienna, nice, rng.choice(["train", "test"]))
            )
        manifest = DatasetManifest(root=tmp_path, records=tuple(records))
        save_manifest(manifest, tmp_path / "m.jsonl")
        assert load_manifest(tmp_path / "m.jsonl") == manifest


class TestSplit:
    def manifest(self, n):
        return DatasetManifest(
            root=None, records=tuple(LogoRecord(i, f"{i}.png", (), (), "train") for i in range(n))
        )

    def test_eighty_twenty(self):
        out = split_train_test(self.manifest(10), 0.8, seed=1)
        assert len(out.subset("train")) == 8
        assert len(out.subset("test")) == 2

    def test_deterministic(self):
        a = split_train_test(self.manifest(50), 0.8, seed=9)
        b = split_train_test(self.manifest(50), 0.8, seed=9)
        assert a == b

    def test_round_half_up(self):
        out = split_train_test(self.manifest(101), 0.5, seed=0)
        assert len(out.subset("train")) == 51

    def test_partition(self):
        out = split_train_test(self.manifest(33), 0.7, seed=4)
        train_ids = {r.logo_id for r in out.subset("train")}
        test_ids = {r.logo_id for r in out.subset("test")}
        assert not train_ids & test_ids
        assert train_ids | test_ids == set(range(33))

    def test_ratio_bounds(self):
        with pytest.raises(ValueError):
            split_train_test(self.manifest(5), 1.0, seed=0)


class TestSyntheticCorpus:
    def test_red_circle_ground_truth(self, tmp_path):
        spec = SyntheticSpec(n_logos=1, colors=("red",), shapes=("circle",), seed=3)
        manifest, _ = generate_synthetic_corpus(spec, tmp_path)
        record = manifest.records[0]
        assert "29.01.01" in record.vienna  # red
        assert "26.01" in record.vienna     # circles, ellipses
        spaces = build_label_spaces()
        ann = build_annotations(manifest, spaces)[0]
        assert {spaces.space(K.COLOR).label(i).name for i in ann[K.COLOR]} == {"Red"}
        assert {spaces.space(K.SHAPE).label(i).name for i in ann[K.SHAPE]} == {"Circles, ellipses"}

    def test_group_plus_distractor_counts(self, tmp_path):
        spec = SyntheticSpec(n_logos=80, duplicate_groups=5, duplicates_per_group=10, seed=5)
        manifest, groups = generate_synthetic_corpus(spec, tmp_path)
        assert len(manifest.records) == 80
        assert sum(len(m) for m in groups.values()) == 50
        grouped_ids = {i for members in groups.values() for i in members}
        assert len(grouped_ids) == 50
        # no distractor reuses a group's (color, shape) pair
        signatures = {}
        for record in manifest.records:
            signatures[record.logo_id] = (record.vienna[0], record.vienna[1])
        group_signatures = {signatures[next(iter(m))] for m in groups.values()}
        for record in manifest.records:
            if record.logo_id not in grouped_ids:
                assert signatures[record.logo_id] not in group_signatures

    def test_bit_identical_renders(self, tmp_path):
        spec = SyntheticSpec(n_logos=6, duplicate_groups=1, duplicates_per_group=3, seed=7)
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        generate_synthetic_corpus(spec, a_dir)
        generate_synthetic_corpus(spec, b_dir)
        for i in range(6):
            name = f"images/logo_{i:05d}.png"
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()

    def test_groups_json_roundtrip(self, tmp_path):
        spec = SyntheticSpec(n_logos=12, duplicate_groups=2, duplicates_per_group=4, seed=9)
        _, groups = generate_synthetic_corpus(spec, tmp_path)
        assert load_groups(tmp_path / "groups.json") == groups

    def test_text_strip_labels(self, tmp_path):
        spec = SyntheticSpec(n_logos=30, text_fraction=1.0, seed=13)
        manifest, _ = generate_synthetic_corpus(spec, tmp_path)
        spaces = build_label_spaces()
        ann = build_annotations(manifest, spaces)
        assert all(ann[r.logo_id][K.TEXT] == frozenset({1}) for r in manifest.records)

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            SyntheticSpec(n_logos=5, duplicate_groups=2, duplicates_per_group=3)
        with pytest.raises(ValueError):
            SyntheticSpec(n_logos=5, colors=("ultraviolet",))

    def test_spec_from_json(self, tmp_path):
        p = tmp_path / "spec.json"
        p.write_text(json.dumps({"n_logos": 4, "seed": 2, "colors": ["red", "blue"]}))
        spec = SyntheticSpec.from_json(p)
        assert spec.n_logos == 4 and spec.colors == ("red", "blue")
