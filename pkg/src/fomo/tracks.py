"""Descriptor track interchange format (JSON).

Schema, version tag "fomo-track/1":

    {"version": "fomo-track/1", "k": K,
     "frames": [{"keypoints": [{"p": [x, y],
                                "jac": [[a, b], [c, d]]} x K]} x T]}

Positions are normalized canvas coordinates; a lenient [-2, 2] bound
allows keypoints to move off-canvas. Single-frame descriptor files carry
just the inner {"keypoints": [...]} object.
"""

from __future__ import annotations

import json

from .errors import FileFormatError
from .geometry import FrameDescriptor, KeypointDescriptor, Mat2, Point2

TRACK_VERSION = "fomo-track/1"
POSITION_BOUND = 2.0


def frame_to_json_dict(frame: FrameDescriptor) -> dict:
    return {
        "keypoints": [
            {
                "p": [kp.position.x, kp.position.y],
                "jac": kp.jacobian.as_array().tolist(),
            }
            for kp in frame.keypoints
        ]
    }


def frame_from_json_dict(d: dict, where: str = "frame") -> FrameDescriptor:
    try:
        kps = []
        for idx, kp in enumerate(d["keypoints"]):
            x, y = (float(v) for v in kp["p"])
            if abs(x) > POSITION_BOUND or abs(y) > POSITION_BOUND:
                raise FileFormatError(
                    f"{where}: keypoint {idx} position ({x}, {y}) outside "
                    f"[-{POSITION_BOUND}, {POSITION_BOUND}]"
                )
            (a, b), (c, dd) = kp["jac"]
            kps.append(
                KeypointDescriptor(
                    Point2(x, y), Mat2(float(a), float(b), float(c), float(dd))
                )
            )
        if not kps:
            raise FileFormatError(f"{where}: empty keypoint list")
        return FrameDescriptor(tuple(kps))
    except (KeyError, TypeError, ValueError) as e:
        raise FileFormatError(f"{where}: malformed descriptor ({e})") from None


def save_frame(frame: FrameDescriptor, path) -> None:
    with open(path, "w") as f:
        json.dump(frame_to_json_dict(frame), f, indent=2)


def load_frame(path) -> FrameDescriptor:
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise FileFormatError(f"{path}: {e}") from None
    return frame_from_json_dict(d, where=str(path))


class DescriptorTrack:
    """An ordered sequence of frame descriptors sharing one K."""

    def __init__(self, frames):
        frames = tuple(frames)
        if not frames:
            raise FileFormatError("track has no frames")
        ks = {f.k for f in frames}
        if len(ks) != 1:
            raise FileFormatError(f"track frames disagree on K: {sorted(ks)}")
        self.frames = frames
        self.k = frames[0].k

    def __len__(self) -> int:
        return len(self.frames)

    def to_json_dict(self) -> dict:
        return {
            "version": TRACK_VERSION,
            "k": self.k,
            "frames": [frame_to_json_dict(f) for f in self.frames],
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=2)

    @staticmethod
    def from_json_dict(d: dict, where: str = "track") -> "DescriptorTrack":
        version = d.get("version")
        if version != TRACK_VERSION:
            raise FileFormatError(
                f"{where}: unsupported track version {version!r} "
                f"(expected {TRACK_VERSION!r})"
            )
        try:
            declared_k = int(d["k"])
            frames = [
                frame_from_json_dict(fd, where=f"{where} frame {i}")
                for i, fd in enumerate(d["frames"])
            ]
        except (KeyError, TypeError, ValueError) as e:
            raise FileFormatError(f"{where}: malformed track ({e})") from None
        track = DescriptorTrack(frames)
        if track.k != declared_k:
            raise FileFormatError(
                f"{where}: declared k={declared_k} but frames carry K={track.k}"
            )
        return track

    @staticmethod
    def load(path) -> "DescriptorTrack":
        with open(path) as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise FileFormatError(f"{path}: {e}") from None
        return DescriptorTrack.from_json_dict(d, where=str(path))
