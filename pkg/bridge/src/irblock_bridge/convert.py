"""COCO-style thermal annotation files -> attack-campaign manifest.

Keeps only person boxes strictly taller than the height gate (default 120
px) and drops images left without any, matching how the evaluation subset is
curated. Unreadable or malformed inputs are reported and skipped; conversion
continues with whatever remains.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

log = logging.getLogger(__name__)

PERSON = "person"
DEFAULT_MIN_HEIGHT = 120


def convert_annotations(
    annotation_paths: list[str | Path],
    out_path: str | Path,
    images_root: str = "",
    min_height_px: int = DEFAULT_MIN_HEIGHT,
    person_category: str = PERSON,
) -> dict:
    """Write the manifest document and return it.

    Each input is a COCO-style JSON with images / annotations / categories;
    bbox format is [x, y, w, h]. Paths in the manifest are the source
    file_name values joined under images_root.
    """
    images: dict[int, dict] = {}
    boxes: dict[int, list[dict]] = {}
    warnings: list[str] = []

    for path in annotation_paths:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
            person_ids = {
                int(c["id"])
                for c in doc.get("categories", [])
                if str(c.get("name", "")).lower() == person_category
            }
            for entry in doc.get("images", []):
                images[int(entry["id"])] = entry
            for ann in doc.get("annotations", []):
                if int(ann.get("category_id", -1)) not in person_ids:
                    continue
                x, y, w, h = (float(v) for v in ann["bbox"])
                if h <= min_height_px:
                    continue
                boxes.setdefault(int(ann["image_id"]), []).append(
                    {
                        "x": int(round(x)),
                        "y": int(round(y)),
                        "w": max(1, int(round(w))),
                        "h": max(1, int(round(h))),
                        "label": person_category,
                    }
                )
        except (OSError, ValueError, KeyError, TypeError) as exc:
            message = f"skipping {path}: {exc}"
            warnings.append(message)
            log.warning("%s", message)

    records = []
    for image_id in sorted(boxes):
        entry = images.get(image_id)
        if entry is None:
            message = f"annotations reference unknown image id {image_id}"
            warnings.append(message)
            log.warning("%s", message)
            continue
        rel = str(Path(images_root) / entry["file_name"]) if images_root else str(entry["file_name"])
        records.append({"path": rel, "boxes": boxes[image_id]})

    if not records:
        warnings.append("no images with qualifying person boxes; manifest is empty")
        log.warning("no images with qualifying person boxes; manifest is empty")

    manifest = {"min_height_px": min_height_px, "images": records}
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {"manifest": manifest, "warnings": warnings}
