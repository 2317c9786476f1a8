import json

import pytest

CAPTIONS = [
    ("item-00", "a red round lamp on a desk"),
    ("item-01", "a blue square table"),
    ("item-02", "a green oval rug"),
    ("item-03", "a black rectangular shelf"),
    ("item-04", "a white curved chair"),
    ("item-05", "a yellow pointed vase"),
    ("item-06", "a purple flat cushion"),
    ("item-07", "an orange slim bottle"),
    ("item-08", "a wooden stool"),
    ("item-09", "a metal rack"),
    ("item-10", "a glass jar"),
    ("item-11", "a ceramic bowl"),
    ("item-12", "a navy boxy cabinet"),
    ("item-13", "a teal tapered jug"),
]

TRAIN_ROWS = [
    {"ref_id": "item-00", "target_id": "item-01", "text": "make it blue and square"},
    {"ref_id": "item-01", "target_id": "item-02", "text": "turn it green with an oval top"},
    {"ref_id": "item-02", "target_id": "item-03", "text": "prefer a black one"},
    {"ref_id": "item-03", "target_id": "item-04", "text": "something curved instead"},
    {"ref_id": "item-04", "target_id": "item-05", "text": "brighter and taller please"},
    {"ref_id": "item-05", "target_id": "item-06", "text": "PURPLE and FLAT"},
    {"ref_id": "item-06", "target_id": "item-07", "text": "orange, slim profile"},
    {"ref_id": "item-07", "target_id": "item-08", "text": "plain wood finish"},
    {
        "ref_id": "item-08",
        "target_id": "item-12",
        "text": "navy blue, more boxy",
        "subset_ids": ["item-12", "item-09", "item-10"],
    },
    {"ref_id": "item-09", "target_id": "item-13", "text": "teal with a tapered neck"},
]


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("dataset")
    (root / "corpus.json").write_text(
        json.dumps({"items": [{"id": i, "caption": c} for i, c in CAPTIONS]}),
        encoding="utf-8",
    )
    (root / "triplets.train.json").write_text(json.dumps(TRAIN_ROWS), encoding="utf-8")
    (root / "triplets.test.json").write_text("[]", encoding="utf-8")
    return root


@pytest.fixture(scope="session")
def exported(dataset_dir, tmp_path_factory):
    from embexport import ExportJob, export, load_lexicon

    out = tmp_path_factory.mktemp("exported")
    job = ExportJob(
        dataset_root=dataset_dir,
        split="train",
        encoder="hash:16",
        out_dir=out,
        lexicon=load_lexicon("default"),
    )
    return export(job)
