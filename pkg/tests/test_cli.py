"""End-to-end CLI tests: exit codes, file outputs, determinism."""

import json

import numpy as np

from partfuse import formats
from partfuse.cli import main
from partfuse.imaging import Image, write_pnm
from partfuse.pointcloud import save_camera, write_ply

from conftest import BAG, BOTTLE, CENTER, OTHER, SEAL, TABLE, make_triple
from scenes import build_rgbd_scene, rgbd_config, scene_image
from test_autolabel_monitor import BLUE_BG, disk_scene


def write_fuse_sample(directory, name, taxonomy_order=True):
    """Logits for an 8x8 frame: a bag proposal on the left half over a
    table background; the right half stays table."""
    h = w = 8
    sem = np.zeros((4, h, w), dtype=np.float32)
    sem[0, :, :4] = 4.0  # bag channel
    sem[3] = 1.0  # table
    part = np.zeros((3, h, w), dtype=np.float32)
    part[0] = 2.0  # seal
    formats.write_tensor(sem, directory / f"{name}.sem.ppt1")
    formats.write_tensor(part, directory / f"{name}.part.ppt1")
    mask = np.full((h, w), -8.0, dtype=np.float32)
    mask[:, :4] = 4.0
    formats.write_tensor(mask, directory / f"{name}_p0.ppt1")
    (directory / f"{name}.proposals.json").write_text(
        json.dumps(
            [
                {
                    "class_id": BAG,
                    "confidence": 0.9,
                    "mask_tensor_path": f"{name}_p0.ppt1",
                }
            ]
        )
    )


def read_triple_trio(stem):
    t = formats.read_label_triple(stem)
    return t.semantic_map, t.instance_map, t.part_map


def test_fuse_single_sample(tmp_path, taxonomy_json):
    inputs = tmp_path / "in"
    inputs.mkdir()
    write_fuse_sample(inputs, "img0")
    out = tmp_path / "out"
    code = main(
        [
            "fuse",
            "--taxonomy",
            str(taxonomy_json),
            "--out",
            str(out),
            "--min-instance-area",
            "1",
            str(inputs),
        ]
    )
    assert code == 0
    sem, inst, part = read_triple_trio(out / "img0")
    assert (sem[:, :4] == BAG).all()
    assert (inst[:, :4] == 1).all()
    assert (sem[:, 4:] == TABLE).all()
    assert (part == SEAL).all()


def test_fuse_missing_taxonomy(tmp_path):
    inputs = tmp_path / "in"
    inputs.mkdir()
    write_fuse_sample(inputs, "img0")
    code = main(
        [
            "fuse",
            "--taxonomy",
            str(tmp_path / "nope.json"),
            "--out",
            str(tmp_path / "out"),
            str(inputs),
        ]
    )
    assert code == 3


def test_fuse_corrupt_tensor_is_io_error(tmp_path, taxonomy_json):
    inputs = tmp_path / "in"
    inputs.mkdir()
    write_fuse_sample(inputs, "img0")
    (inputs / "img0.sem.ppt1").write_bytes(b"XXXX garbage")
    code = main(
        [
            "fuse",
            "--taxonomy",
            str(taxonomy_json),
            "--out",
            str(tmp_path / "out"),
            str(inputs),
        ]
    )
    assert code == 2


def conflict_logits(tmp_path):
    """Bottle proposal on the left, bag on the right, seal part argmax
    everywhere: the left half conflicts."""
    h, w = 8, 16
    sem = np.zeros((4, h, w), dtype=np.float32)
    sem[0, :, 8:] = 4.0  # bag right
    sem[1, :, :8] = 4.0  # bottle left
    sem[3] = -10.0  # table never wins
    part = np.zeros((3, h, w), dtype=np.float32)
    part[0] = 3.0  # seal
    inputs = tmp_path / "conflict_in"
    inputs.mkdir()
    formats.write_tensor(sem, inputs / "c0.sem.ppt1")
    formats.write_tensor(part, inputs / "c0.part.ppt1")
    left = np.full((h, w), -8.0, dtype=np.float32)
    left[:, :8] = 4.0
    right = np.full((h, w), -8.0, dtype=np.float32)
    right[:, 8:] = 4.0
    formats.write_tensor(left, inputs / "c0_left.ppt1")
    formats.write_tensor(right, inputs / "c0_right.ppt1")
    (inputs / "c0.proposals.json").write_text(
        json.dumps(
            [
                {"class_id": BOTTLE, "confidence": 0.9, "mask_tensor_path": "c0_left.ppt1"},
                {"class_id": BAG, "confidence": 0.8, "mask_tensor_path": "c0_right.ppt1"},
            ]
        )
    )
    return inputs


def test_fuse_consensus_voids_conflicts(tmp_path, taxonomy_json):
    inputs = conflict_logits(tmp_path)
    out = tmp_path / "out"
    code = main(
        [
            "fuse",
            "--taxonomy",
            str(taxonomy_json),
            "--strategy",
            "consensus",
            "--out",
            str(out),
            "--min-instance-area",
            "1",
            str(inputs),
        ]
    )
    assert code == 0
    sem, inst, part = read_triple_trio(out / "c0")
    assert (sem[:, :8] == 0).all()  # conflicting half voided
    assert (inst[:, :8] == 0).all()
    assert (part[:, :8] == 0).all()
    assert (sem[:, 8:] == BAG).all()  # consistent half kept


def make_eval_dirs(tmp_path):
    gt_dir = tmp_path / "gt"
    pred_dir = tmp_path / "pred"
    gt_dir.mkdir()
    pred_dir.mkdir()
    # matched bag pair: segment iou 0.8, part score 0.75 (no table in gt)
    h, w = 2, 50
    sem_gt = np.zeros((h, w), dtype=np.uint16)
    sem_gt[0, :45] = BAG
    sem_gt[0, 45:] = 3
    inst_gt = np.zeros_like(sem_gt)
    inst_gt[0, :45] = 1
    inst_gt[0, 45:] = 2
    part_gt = np.zeros_like(sem_gt)
    part_gt[0, 0:10] = SEAL
    part_gt[0, 10:40] = CENTER
    formats.write_label_triple(make_triple(sem_gt, inst_gt, part_gt), gt_dir / "a")

    sem_pr = np.zeros_like(sem_gt)
    sem_pr[0, 5:50] = BAG
    inst_pr = np.zeros_like(sem_gt)
    inst_pr[0, 5:50] = 1
    part_pr = np.zeros_like(sem_gt)
    part_pr[0, 0:10] = SEAL
    part_pr[0, 20:50] = CENTER
    formats.write_label_triple(make_triple(sem_pr, inst_pr, part_pr), pred_dir / "a")
    return gt_dir, pred_dir


def test_eval_perfect_prediction(tmp_path, taxonomy_json, capsys):
    gt_dir, _ = make_eval_dirs(tmp_path)
    code = main(
        ["eval", "--taxonomy", str(taxonomy_json), "--gt", str(gt_dir), str(gt_dir)]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert "1.000" in printed
    assert "-" in printed  # table absent from gt


def test_eval_percent_display(tmp_path, taxonomy_json, capsys):
    gt_dir, _ = make_eval_dirs(tmp_path)
    code = main(
        [
            "eval",
            "--taxonomy",
            str(taxonomy_json),
            "--gt",
            str(gt_dir),
            "--percent",
            str(gt_dir),
        ]
    )
    assert code == 0
    assert "100.0" in capsys.readouterr().out


def test_eval_tsv_report(tmp_path, taxonomy_json, capsys):
    gt_dir, pred_dir = make_eval_dirs(tmp_path)
    tsv = tmp_path / "scores.tsv"
    code = main(
        [
            "eval",
            "--taxonomy",
            str(taxonomy_json),
            "--gt",
            str(gt_dir),
            "--tsv",
            str(tsv),
            str(pred_dir),
        ]
    )
    assert code == 0
    lines = tsv.read_text().splitlines()
    assert lines[0] == "class\tpq\tpart_pq\ttp\tfp\tfn"
    bag_row = [l for l in lines if l.startswith("transfusion_bag")][0]
    cells = bag_row.split("\t")
    assert abs(float(cells[1]) - 0.8) < 1e-9
    assert abs(float(cells[2]) - 0.75) < 1e-9
    table_row = [l for l in lines if l.startswith("table")][0]
    assert table_row.split("\t")[1] == "-"


def test_eval_multiple_strategies(tmp_path, taxonomy_json, capsys):
    gt_dir, pred_dir = make_eval_dirs(tmp_path)
    tsv = tmp_path / "scores.tsv"
    code = main(
        [
            "eval",
            "--taxonomy",
            str(taxonomy_json),
            "--gt",
            str(gt_dir),
            "--tsv",
            str(tsv),
            str(pred_dir),
            str(gt_dir),  # the gt itself as a second, perfect strategy
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    pq_block = out.split("PartPQ")[0]
    assert "pred" in pq_block and "gt" in pq_block  # one row per strategy
    assert (tmp_path / "scores_pred.tsv").exists()
    assert (tmp_path / "scores_gt.tsv").exists()


def test_overlay_alpha_and_boxes_flags(tmp_path, taxonomy_json):
    from partfuse.imaging import read_pnm
    from partfuse.overlay import default_overlay_spec
    from partfuse.taxonomy import load_taxonomy

    image = Image(np.zeros((6, 6, 3), dtype=np.uint8))
    write_pnm(image, tmp_path / "img.ppm")
    sem = np.full((6, 6), TABLE, dtype=np.uint16)
    formats.write_label_triple(make_triple(sem), tmp_path / "img")
    out_path = tmp_path / "o.ppm"
    code = main(
        [
            "overlay",
            "--taxonomy",
            str(taxonomy_json),
            "--alpha",
            "1.0",
            "--no-boxes",
            str(tmp_path / "img.ppm"),
            str(tmp_path / "img"),
            str(out_path),
        ]
    )
    assert code == 0
    spec = default_overlay_spec(load_taxonomy(taxonomy_json))
    rendered = read_pnm(out_path)
    assert (rendered.pixels == np.array(spec.class_colors[TABLE])).all()


def test_eval_dimension_mismatch_exit_code(tmp_path, taxonomy_json):
    gt_dir, pred_dir = make_eval_dirs(tmp_path)
    formats.write_label_triple(
        make_triple(np.zeros((4, 4), dtype=np.uint16)), pred_dir / "a"
    )
    code = main(
        ["eval", "--taxonomy", str(taxonomy_json), "--gt", str(gt_dir), str(pred_dir)]
    )
    assert code == 3


def test_report_renders_tsv(tmp_path, taxonomy_json, capsys):
    gt_dir, pred_dir = make_eval_dirs(tmp_path)
    tsv = tmp_path / "m_b.tsv"
    main(
        [
            "eval",
            "--taxonomy",
            str(taxonomy_json),
            "--gt",
            str(gt_dir),
            "--tsv",
            str(tsv),
            str(pred_dir),
        ]
    )
    capsys.readouterr()
    code = main(["report", "--taxonomy", str(taxonomy_json), "--percent", str(tsv)])
    assert code == 0
    out = capsys.readouterr().out
    assert "m_b" in out
    assert "75.0" in out


def write_rgbd_scene_dir(tmp_path, name="scene_0", seed=0):
    scene = tmp_path / name
    scene.mkdir()
    cloud, _, camera = build_rgbd_scene(seed=seed)
    write_pnm(scene_image(camera), scene / "rgb.ppm")
    write_ply(cloud, scene / "cloud.ply")
    save_camera(camera, scene / "camera.json")
    return scene


def write_rgbd_config(tmp_path):
    cfg = rgbd_config()
    payload = {
        "object_class_id": cfg.object_class_id,
        "background_class_id": cfg.background_class_id,
        "seed": 0,
        "part_rules": [
            {
                "part_id": SEAL,
                "priority": 1,
                "hsv_range": {"h_min": 345.0, "h_max": 15.0, "s_min": 0.5, "v_min": 0.3},
            }
        ],
        "catchall_part_id": OTHER,
    }
    path = tmp_path / "rgbd_config.json"
    path.write_text(json.dumps(payload))
    return path


def tree_bytes(directory):
    return {
        p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()
    }


def test_label_rgbd_end_to_end(tmp_path, taxonomy_json):
    scene = write_rgbd_scene_dir(tmp_path)
    config = write_rgbd_config(tmp_path)
    out = tmp_path / "out"
    code = main(
        [
            "label",
            "rgbd",
            "--taxonomy",
            str(taxonomy_json),
            "--config",
            str(config),
            "--out",
            str(out),
            str(scene),
        ]
    )
    assert code == 0
    assert (out / "scene_0.ppm").exists()
    assert (out / "scene_0.sem.pgm").exists()
    prov = json.loads((out / "scene_0.provenance.json").read_text())
    assert prov["variant"] == "rgbd"
    assert prov["instances"] == 2
    assert prov["params"]["knn_k"] == 5


def test_label_rgbd_deterministic_across_jobs(tmp_path, taxonomy_json):
    scene_a = write_rgbd_scene_dir(tmp_path, "scene_0")
    scene_b = write_rgbd_scene_dir(tmp_path, "scene_1", seed=4)
    config = write_rgbd_config(tmp_path)
    out1 = tmp_path / "out1"
    out2 = tmp_path / "out2"
    args = [
        "label",
        "rgbd",
        "--taxonomy",
        str(taxonomy_json),
        "--config",
        str(config),
    ]
    assert main(args + ["--out", str(out1), "--jobs", "1", str(scene_a), str(scene_b)]) == 0
    assert main(args + ["--out", str(out2), "--jobs", "8", str(scene_a), str(scene_b)]) == 0
    assert tree_bytes(out1) == tree_bytes(out2)


def write_monitor_dataset(tmp_path):
    root = tmp_path / "dataset"
    root.mkdir()
    scene = root / "scene_0"
    scene.mkdir()
    img_blue, img_black, _, _ = disk_scene()
    write_pnm(img_blue, scene / "blue.ppm")
    write_pnm(img_black, scene / "black.ppm")
    rng = np.random.default_rng(5)
    for m in range(2):
        target = Image(rng.integers(0, 256, (128, 128, 3)).astype(np.uint8))
        write_pnm(target, scene / f"target_{m}.ppm")
    backgrounds = tmp_path / "backgrounds"
    backgrounds.mkdir()
    for b in range(3):
        bg = Image(rng.integers(0, 256, (128, 128, 3)).astype(np.uint8))
        write_pnm(bg, backgrounds / f"bg_{b}.ppm")
    config = {
        "object_class_id": BAG,
        "background_class_id": 0,
        "part_rules": [
            {
                "part_id": SEAL,
                "priority": 1,
                "hsv_range": {"h_min": 345.0, "h_max": 15.0, "s_min": 0.5, "v_min": 0.3},
            }
        ],
        "catchall_part_id": OTHER,
        "blue_range": {"h_min": 200.0, "h_max": 260.0, "s_min": 0.35, "v_min": 0.2},
        "black_range": {"v_max": 0.2},
    }
    config_path = tmp_path / "monitor_config.json"
    config_path.write_text(json.dumps(config))
    return root, backgrounds, config_path


def test_label_monitor_end_to_end(tmp_path, taxonomy_json):
    root, backgrounds, config = write_monitor_dataset(tmp_path)
    out = tmp_path / "out"
    code = main(
        [
            "label",
            "monitor",
            "--taxonomy",
            str(taxonomy_json),
            "--config",
            str(config),
            "--out",
            str(out),
            "--backgrounds",
            str(backgrounds),
            "--composites",
            "2",
            "--seed",
            "9",
            str(root),
        ]
    )
    assert code == 0
    assert (out / "scene_0_target_0.sem.pgm").exists()
    assert (out / "scene_0_target_1.sem.pgm").exists()
    assert (out / "scene_0_synth_000.ppm").exists()
    assert (out / "scene_0_synth_001.ppm").exists()
    # target labels and composite labels are identical to the reference
    t0 = formats.read_label_triple(out / "scene_0_target_0")
    s0 = formats.read_label_triple(out / "scene_0_synth_000")
    assert np.array_equal(t0.semantic_map, s0.semantic_map)
    assert np.array_equal(t0.part_map, s0.part_map)


def test_label_monitor_same_seed_byte_identical(tmp_path, taxonomy_json):
    root, backgrounds, config = write_monitor_dataset(tmp_path)
    outs = []
    for name in ("o1", "o2"):
        out = tmp_path / name
        code = main(
            [
                "label",
                "monitor",
                "--taxonomy",
                str(taxonomy_json),
                "--config",
                str(config),
                "--out",
                str(out),
                "--backgrounds",
                str(backgrounds),
                "--composites",
                "3",
                "--seed",
                "42",
                str(root),
            ]
        )
        assert code == 0
        outs.append(tree_bytes(out))
    assert outs[0] == outs[1]


def test_label_monitor_empty_scene_needs_keep_going(tmp_path, taxonomy_json):
    root, backgrounds, config = write_monitor_dataset(tmp_path)
    empty = root / "scene_1"
    empty.mkdir()
    blue = Image(np.tile(np.array(BLUE_BG, dtype=np.uint8), (128, 128, 1)))
    black = Image(np.zeros((128, 128, 3), dtype=np.uint8))
    write_pnm(blue, empty / "blue.ppm")
    write_pnm(black, empty / "black.ppm")

    args = [
        "label",
        "monitor",
        "--taxonomy",
        str(taxonomy_json),
        "--config",
        str(config),
        str(root),
    ]
    strict = main(args[:2] + args[2:-1] + ["--out", str(tmp_path / "s")] + [str(root)])
    assert strict == 3
    lenient = main(
        args[:-1] + ["--out", str(tmp_path / "l"), "--keep-going", str(root)]
    )
    assert lenient == 0
    assert (tmp_path / "l" / "scene_0_target_0.ppm").exists()


def write_augment_dataset(tmp_path):
    dataset = tmp_path / "samples"
    dataset.mkdir()
    rng = np.random.default_rng(6)
    for name in ("s0", "s1"):
        image = Image(rng.integers(0, 256, (6, 8, 3)).astype(np.uint8))
        write_pnm(image, dataset / f"{name}.ppm")
        triple = make_triple(
            rng.integers(0, 4, (6, 8)),
            np.zeros((6, 8), dtype=np.uint16),
            rng.integers(0, 3, (6, 8)),
        )
        formats.write_label_triple(triple, dataset / name)
    return dataset


def test_augment_writes_four_variants(tmp_path):
    dataset = write_augment_dataset(tmp_path)
    out = tmp_path / "aug"
    code = main(["augment", "--out", str(out), str(dataset)])
    assert code == 0
    ppms = sorted(p.name for p in out.glob("*.ppm"))
    assert len(ppms) == 8  # 2 samples x 4 variants
    assert "s0_vflip.ppm" in ppms and "s1_rot180.ppm" in ppms
    # re-flipping the vflip output reproduces the original
    from partfuse.imaging import read_pnm

    original = read_pnm(dataset / "s0.ppm")
    vflip = read_pnm(out / "s0_vflip.ppm")
    assert np.array_equal(vflip.pixels[::-1, :], original.pixels)
    trip_orig = formats.read_label_triple(dataset / "s0")
    trip_v = formats.read_label_triple(out / "s0_vflip")
    assert np.array_equal(trip_v.semantic_map[::-1, :], trip_orig.semantic_map)


def test_augment_unreadable_sample_exit_code(tmp_path):
    dataset = write_augment_dataset(tmp_path)
    (dataset / "s0.sem.pgm").unlink()  # break one sample
    code = main(["augment", "--out", str(tmp_path / "aug"), str(dataset)])
    assert code == 3
    code = main(
        ["augment", "--out", str(tmp_path / "aug2"), "--keep-going", str(dataset)]
    )
    assert code == 0
    assert (tmp_path / "aug2" / "s1_id.ppm").exists()


def test_overlay_all_void_passthrough(tmp_path, taxonomy_json):
    rng = np.random.default_rng(7)
    image = Image(rng.integers(0, 256, (8, 8, 3)).astype(np.uint8))
    write_pnm(image, tmp_path / "img.ppm")
    formats.write_label_triple(
        make_triple(np.zeros((8, 8), dtype=np.uint16)), tmp_path / "img"
    )
    out_path = tmp_path / "overlay.ppm"
    code = main(
        [
            "overlay",
            "--taxonomy",
            str(taxonomy_json),
            str(tmp_path / "img.ppm"),
            str(tmp_path / "img"),
            str(out_path),
        ]
    )
    assert code == 0
    from partfuse.imaging import read_pnm

    assert np.array_equal(read_pnm(out_path).pixels, image.pixels)


def test_overlay_dimension_mismatch_exit(tmp_path, taxonomy_json):
    rng = np.random.default_rng(8)
    image = Image(rng.integers(0, 256, (8, 8, 3)).astype(np.uint8))
    write_pnm(image, tmp_path / "img.ppm")
    formats.write_label_triple(
        make_triple(np.zeros((4, 4), dtype=np.uint16)), tmp_path / "img"
    )
    code = main(
        [
            "overlay",
            "--taxonomy",
            str(taxonomy_json),
            str(tmp_path / "img.ppm"),
            str(tmp_path / "img"),
            str(tmp_path / "o.ppm"),
        ]
    )
    assert code == 3


def test_fuse_rerun_and_jobs_byte_identical(tmp_path, taxonomy_json):
    inputs = tmp_path / "in"
    inputs.mkdir()
    for i in range(4):
        write_fuse_sample(inputs, f"img{i}")
    outs = []
    for name, jobs in (("r1", "1"), ("r2", "1"), ("r8", "8")):
        out = tmp_path / name
        code = main(
            [
                "fuse",
                "--taxonomy",
                str(taxonomy_json),
                "--out",
                str(out),
                "--jobs",
                jobs,
                "--min-instance-area",
                "1",
                str(inputs),
            ]
        )
        assert code == 0
        outs.append(tree_bytes(out))
    assert outs[0] == outs[1] == outs[2]


def test_config_file_flags_win(tmp_path, taxonomy_json):
    inputs = tmp_path / "in"
    inputs.mkdir()
    write_fuse_sample(inputs, "img0")
    cfg = tmp_path / "run.json"
    cfg.write_text(
        json.dumps(
            {
                "taxonomy": str(taxonomy_json),
                "strategy": "consensus",
                "min_instance_area": 1,
            }
        )
    )
    out = tmp_path / "out"
    # flag overrides the config's consensus strategy
    code = main(
        [
            "fuse",
            "--config",
            str(cfg),
            "--strategy",
            "none",
            "--out",
            str(out),
            str(inputs),
        ]
    )
    assert code == 0
    sem, _, part = read_triple_trio(out / "img0")
    assert (part == SEAL).all()  # "none" keeps the conflicting part labels
