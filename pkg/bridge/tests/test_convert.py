import json

import pytest

from irblock_bridge.convert import convert_annotations


def coco_doc(boxes, file_name="thermal/img_0001.png", image_id=1):
    return {
        "images": [{"id": image_id, "file_name": file_name, "width": 640, "height": 512}],
        "annotations": [
            {"id": i, "image_id": image_id, "category_id": cat, "bbox": bbox}
            for i, (cat, bbox) in enumerate(boxes)
        ],
        "categories": [
            {"id": 1, "name": "person"},
            {"id": 2, "name": "bicycle"},
            {"id": 3, "name": "car"},
        ],
    }


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


class TestHeightFilter:
    @pytest.mark.parametrize(
        "height,kept",
        [(119, False), (120, False), (121, True), (150, True)],
    )
    def test_taller_than_gate(self, tmp_path, height, kept):
        src = write(tmp_path, "ann.json", coco_doc([(1, [10, 10, 40, height])]))
        result = convert_annotations([src], tmp_path / "manifest.json")
        images = result["manifest"]["images"]
        assert bool(images) is kept
        if kept:
            assert images[0]["boxes"][0]["h"] == height

    def test_non_person_classes_dropped(self, tmp_path):
        src = write(
            tmp_path,
            "ann.json",
            coco_doc([(1, [10, 10, 40, 130]), (3, [0, 0, 200, 200])]),
        )
        result = convert_annotations([src], tmp_path / "manifest.json")
        boxes = result["manifest"]["images"][0]["boxes"]
        assert len(boxes) == 1 and boxes[0]["label"] == "person"

    def test_image_dropped_when_no_tall_person_remains(self, tmp_path):
        src = write(
            tmp_path,
            "ann.json",
            coco_doc([(1, [10, 10, 40, 100]), (1, [60, 10, 40, 90])]),
        )
        result = convert_annotations([src], tmp_path / "manifest.json")
        assert result["manifest"]["images"] == []
        assert any("empty" in w for w in result["warnings"])


class TestRobustness:
    def test_empty_annotation_set_warns(self, tmp_path):
        src = write(tmp_path, "ann.json", {"images": [], "annotations": [], "categories": []})
        result = convert_annotations([src], tmp_path / "manifest.json")
        assert result["manifest"]["images"] == []
        assert result["warnings"]

    def test_malformed_file_itemized_and_skipped(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        good = write(tmp_path, "good.json", coco_doc([(1, [5, 5, 30, 140])]))
        result = convert_annotations([bad, good], tmp_path / "manifest.json")
        assert len(result["manifest"]["images"]) == 1
        assert any("bad.json" in w for w in result["warnings"])

    def test_missing_file_itemized(self, tmp_path):
        result = convert_annotations([tmp_path / "nope.json"], tmp_path / "manifest.json")
        assert result["manifest"]["images"] == []
        assert any("nope.json" in w for w in result["warnings"])


class TestOutputFormat:
    def test_manifest_loads_in_attack_package(self, tmp_path):
        pytest.importorskip("irblock")
        src = write(
            tmp_path,
            "ann.json",
            coco_doc([(1, [12, 20, 48, 133]), (1, [200, 20, 40, 119])]),
        )
        out = tmp_path / "manifest.json"
        convert_annotations([src], out, images_root="data")
        from irblock.evaluate import load_manifest

        manifest = load_manifest(out)
        assert manifest.min_height_px == 120
        record = manifest.records[0]
        assert record.path == "data/thermal/img_0001.png"
        targets = manifest.eligible_targets(record)
        assert len(targets) == 1 and targets[0].h == 133

    def test_multiple_sources_merge(self, tmp_path):
        a = write(tmp_path, "a.json", coco_doc([(1, [0, 0, 30, 130])], image_id=1))
        b = write(
            tmp_path, "b.json",
            coco_doc([(1, [5, 5, 30, 140])], file_name="thermal/img_0002.png", image_id=2),
        )
        result = convert_annotations([a, b], tmp_path / "manifest.json")
        assert len(result["manifest"]["images"]) == 2
