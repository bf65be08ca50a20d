import json

import pytest

from rallyshot import ingest
from rallyshot.errors import ParseError, ValidationError


def write_lines(path, lines):
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


class TestDetections:
    def test_direct_field_mapping(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, ['{"frame":0,"bbox":[10,20,50,90],"score":0.98}'])
        (det,) = ingest.read_detections(p)
        assert det.frame == 0
        assert det.bbox == (10.0, 20.0, 50.0, 90.0)
        assert det.score == 0.98
        assert det.bottom_center == (30.0, 90.0)

    def test_inverted_bbox_rejected(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, ['{"frame":0,"bbox":[50,20,10,90],"score":0.5}'])
        with pytest.raises(ValidationError) as exc:
            ingest.read_detections(p)
        assert exc.value.field == "bbox"

    def test_empty_file(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text("", encoding="utf-8")
        assert ingest.read_detections(p) == []

    def test_malformed_line_names_line_number(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, ['{"frame":0,"bbox":[0,0,1,1],"score":0.5}', "not json"])
        with pytest.raises(ParseError) as exc:
            ingest.read_detections(p)
        assert exc.value.line_no == 2

    def test_score_out_of_range(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, ['{"frame":0,"bbox":[0,0,1,1],"score":1.5}'])
        with pytest.raises(ValidationError) as exc:
            ingest.read_detections(p)
        assert exc.value.field == "score"

    def test_decreasing_frames_rejected(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, ['{"frame":5,"bbox":[0,0,1,1],"score":0.5}',
                        '{"frame":4,"bbox":[0,0,1,1],"score":0.5}'])
        with pytest.raises(ValidationError):
            ingest.read_detections(p)


class TestKeypoints:
    @staticmethod
    def record(frame=0, player_id=0, n=17):
        kp = [[float(i), float(i + 1), 0.9] for i in range(n)]
        return json.dumps({"frame": frame, "player_id": player_id, "kp": kp})

    def test_direct_mapping(self, tmp_path):
        p = tmp_path / "k.jsonl"
        write_lines(p, [self.record()])
        (rec,) = ingest.read_keypoints(p)
        assert rec.frame == 0 and rec.player_id == 0
        assert len(rec.keypoints) == 17
        assert rec.keypoints[3] == (3.0, 4.0, 0.9)

    def test_sixteen_triples_rejected(self, tmp_path):
        p = tmp_path / "k.jsonl"
        write_lines(p, [self.record(n=16)])
        with pytest.raises(ValidationError, match="17 keypoints"):
            ingest.read_keypoints(p)

    def test_two_players_same_frame_accepted(self, tmp_path):
        p = tmp_path / "k.jsonl"
        write_lines(p, [self.record(frame=3, player_id=0),
                        self.record(frame=3, player_id=1)])
        recs = ingest.read_keypoints(p)
        assert [r.player_id for r in recs] == [0, 1]


class TestAnnotations:
    def test_direct_mapping(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("rally_id,frame,player_id\n1,305,0\n", encoding="utf-8")
        (ann,) = ingest.read_annotations(p)
        assert (ann.rally_id, ann.frame, ann.player_id) == (1, 305, 0)

    def test_duplicate_rejected(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("rally_id,frame,player_id\n1,305,0\n2,305,0\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="duplicate"):
            ingest.read_annotations(p)

    def test_out_of_order_returned_sorted(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("rally_id,frame,player_id\n1,400,0\n1,305,1\n", encoding="utf-8")
        anns = ingest.read_annotations(p)
        assert [a.frame for a in anns] == [305, 400]


class TestCorners:
    def test_roundtrip_and_validation(self, tmp_path):
        p = tmp_path / "c.json"
        doc = {"width": 1280, "height": 720,
               "boxes": [[0, 0, 10, 10], [100, 0, 110, 10],
                         [0, 100, 10, 110], [100, 100, 110, 110]]}
        p.write_text(json.dumps(doc), encoding="utf-8")
        corners = ingest.read_corners(p)
        assert corners.width == 1280 and len(corners.boxes) == 4

    def test_three_boxes_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"width": 10, "height": 10,
                                 "boxes": [[0, 0, 1, 1]] * 3}), encoding="utf-8")
        with pytest.raises(ValidationError, match="4 corner boxes"):
            ingest.read_corners(p)

    def test_box_outside_frame_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"width": 10, "height": 10,
                                 "boxes": [[0, 0, 11, 1]] + [[0, 0, 1, 1]] * 3}),
                     encoding="utf-8")
        with pytest.raises(ValidationError, match="within"):
            ingest.read_corners(p)


class TestRoundTrip:
    """write(read(x)) must reproduce canonical files byte for byte."""

    def test_detections(self, tmp_path):
        from rallyshot.sim import generate_rally, random_scenario
        _, dets = generate_rally(random_scenario(2, 40, noise_sigma=1.0, seed=2))
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        ingest.write_detections(p1, dets)
        ingest.write_detections(p2, ingest.read_detections(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_keypoints_and_annotations(self, tmp_path):
        from rallyshot.sim import MotionParams, generate_pose_dataset
        ds = generate_pose_dataset(3, MotionParams(seed=4))
        kp1, kp2 = tmp_path / "k1.jsonl", tmp_path / "k2.jsonl"
        ingest.write_keypoints(kp1, ds.keypoints)
        ingest.write_keypoints(kp2, ingest.read_keypoints(kp1))
        assert kp1.read_bytes() == kp2.read_bytes()

        a1, a2 = tmp_path / "a1.csv", tmp_path / "a2.csv"
        ingest.write_annotations(a1, ds.annotations)
        ingest.write_annotations(a2, ingest.read_annotations(a1))
        assert a1.read_bytes() == a2.read_bytes()

    def test_corners(self, tmp_path):
        from rallyshot.sim import default_corners
        p1, p2 = tmp_path / "c1.json", tmp_path / "c2.json"
        ingest.write_corners(p1, default_corners())
        ingest.write_corners(p2, ingest.read_corners(p1))
        assert p1.read_bytes() == p2.read_bytes()
