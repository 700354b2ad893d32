"""Command-line entry point.

Subcommands: build, score, attn, plan, synth, validate.
Exit codes: 0 ok, 1 usage, 2 data error, 3 internal.

Every run is deterministic given the config plus ``--seed``; outputs are
written atomically, so re-running a command overwrites its outputs
byte-identically. Warnings go to stderr and never affect the exit code.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .assignment import PromptTemplate, assign_caption, build_sequence
from .bundle import ModelCfg, load_run
from .captions import CaptionSource, load_caption_dataset
from .efficiency import anchor_mask, context_mask, kv_estimate, prune_plan
from .errors import DataError, DomainError, IclensError, LoadError
from .retrieval import EmbeddingTable, load_embedding_table, rs_sample, siir_retrieve
from .segmentation import TokenSegmentation, load_segmentation, save_segmentation
from .attention_metrics import SENTINEL, acar, iear, vcar
from .synth import SynthSpec, gen_attention
from .tensor_io import Tensor, write_tensor_file
from .text_metrics import (
    build_document_frequency,
    chair,
    cider,
    clipscore,
    load_chair_lexicon,
    shortcut_cider,
)
from ._util import atomic_write_text, load_json, write_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


def warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


# --- config -------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    retrieval: str
    source: CaptionSource
    shots: int
    seed: int
    paths: dict[str, Path]
    metrics: dict[str, bool]
    queries: tuple[str, ...] | None
    template: PromptTemplate
    raw_text: str

    @classmethod
    def load(cls, path, seed_override: int | None = None) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise LoadError(f"missing config: {path}")
        raw_text = path.read_text(encoding="utf-8")
        try:
            obj = json.loads(raw_text)
        except json.JSONDecodeError as e:
            raise DataError(f"config {path} is not valid JSON: {e}")
        retrieval = obj.get("retrieval", "siir")
        if retrieval not in ("siir", "rs"):
            raise DataError(f"retrieval must be 'siir' or 'rs', got {retrieval!r}")
        try:
            source = CaptionSource(obj.get("source", "fhl"))
        except ValueError:
            raise DataError(f"unknown caption source {obj.get('source')!r}")
        shots = int(obj.get("shots", 4))
        if shots < 1:
            raise DataError("shots must be >= 1")
        seed = int(obj.get("seed", 0)) if seed_override is None else seed_override
        paths = {}
        for key, value in (obj.get("paths") or {}).items():
            p = Path(value)
            if not p.is_absolute():
                p = path.parent / p
            paths[key] = p
            if not p.exists():
                raise DataError(f"config path {key!r} does not exist: {p}")
        metrics = {
            "cider": True,
            "clipscore": True,
            "chair": True,
            "shortcut": True,
            **(obj.get("metrics") or {}),
        }
        queries = obj.get("queries")
        template_obj = obj.get("template") or {}
        template = PromptTemplate(
            bos=template_obj.get("bos", "<BOS>"),
            image=template_obj.get("image", "<image>"),
            delimiter=template_obj.get("delimiter", "<endofchunk>"),
            cue=tuple(template_obj.get("cue", ("Output", ":"))),
        )
        return cls(
            retrieval=retrieval,
            source=source,
            shots=shots,
            seed=seed,
            paths=paths,
            metrics=metrics,
            queries=None if queries is None else tuple(str(q) for q in queries),
            template=template,
            raw_text=raw_text,
        )

    def path(self, key: str) -> Path:
        if key not in self.paths:
            raise DataError(f"config is missing required path {key!r}")
        return self.paths[key]


def _load_embeddings(cfg: PipelineConfig, tensor_key: str, ids_key: str) -> EmbeddingTable | None:
    if tensor_key not in cfg.paths or ids_key not in cfg.paths:
        return None
    return load_embedding_table(cfg.paths[tensor_key], cfg.paths[ids_key])


# --- build ---------------------------------------------------------------------


def cmd_build(args) -> int:
    cfg = PipelineConfig.load(args.config, args.seed)
    out_dir = Path(args.out)
    ds = load_caption_dataset(cfg.path("captions"))
    table = _load_embeddings(cfg, "embeddings", "embedding_ids")
    if table is None:
        raise DataError("build needs config paths 'embeddings' and 'embedding_ids'")

    queries = list(cfg.queries) if cfg.queries is not None else sorted(table.ids)
    if cfg.shots > len(table.ids) - 1:
        raise DataError(
            f"shots={cfg.shots} exceeds corpus size minus query ({len(table.ids) - 1})"
        )

    sequences = []
    for idx, query_id in enumerate(queries):
        if cfg.retrieval == "siir":
            ranked = siir_retrieve(query_id, table, cfg.shots)
            # most similar demonstration goes last, adjacent to the query
            chosen = list(reversed(ranked.ids()))
        else:
            drawn = rs_sample(table.ids, cfg.shots, seed=cfg.seed + idx, exclude=query_id)
            chosen = drawn.ids()
        ices = [
            (image_id, assign_caption(image_id, cfg.source, ds), cfg.source)
            for image_id in chosen
        ]
        seq = build_sequence(ices, query_id, cfg.template)
        sequences.append(
            {
                "sample_id": query_id,
                "query_image_id": query_id,
                "shot_count": seq.shot_count,
                "ices": [
                    {"image_id": i, "caption": c, "source": s.value} for i, c, s in seq.ices
                ],
                "prompt": seq.prompt,
                "layout": [
                    {
                        "index": i,
                        "role": item.role.value,
                        "ice_index": item.ice_index,
                        "text": item.text,
                    }
                    for i, item in enumerate(seq.layout)
                ],
            }
        )
    write_json(
        out_dir / "demos.json",
        {
            "retrieval": cfg.retrieval,
            "source": cfg.source.value,
            "shots": cfg.shots,
            "seed": cfg.seed,
            "ice_order": "most_similar_last" if cfg.retrieval == "siir" else "draw_order",
            "config_echo": cfg.raw_text,
            "sequences": sequences,
        },
    )
    print(f"wrote {len(sequences)} demonstration sequences to {out_dir / 'demos.json'}")
    return EXIT_OK


# --- score ---------------------------------------------------------------------


def _load_demos(path) -> dict:
    obj = load_json(path, "demonstration set")
    if not isinstance(obj, dict) or not isinstance(obj.get("sequences"), list):
        raise DataError(f"demonstration set {path} needs a 'sequences' array")
    return obj


def _load_generated(path) -> list[dict]:
    obj = load_json(path, "generated captions")
    if not isinstance(obj, dict) or not isinstance(obj.get("captions"), list):
        raise DataError(f"captions file {path} needs a 'captions' array")
    for rec in obj["captions"]:
        if "sample_id" not in rec or "caption" not in rec:
            raise DataError("caption entries need sample_id and caption fields")
    return obj["captions"]


def cmd_score(args) -> int:
    cfg = PipelineConfig.load(args.config, args.seed)
    out_dir = Path(args.out)
    demos = _load_demos(cfg.path("demos"))
    generated = _load_generated(Path(args.generated) if args.generated else cfg.path("generated"))
    ds = load_caption_dataset(cfg.path("captions"))

    warnings_seen: list[str] = []

    def note(message: str) -> None:
        warnings_seen.append(message)
        warn(message)

    if not generated:
        note("captions file is empty; writing an empty report")
        write_csv(out_dir / "report.csv", _REPORT_HEADER, [])
        write_json(
            out_dir / "summary.json",
            {"n_samples": 0, "aggregates": {}, "warnings": warnings_seen, "config_echo": cfg.raw_text},
        )
        return EXIT_OK

    by_sample = {seq["sample_id"]: seq for seq in demos["sequences"]}
    got = [rec["sample_id"] for rec in generated]
    orphan_captions = [s for s in got if s not in by_sample]
    orphan_demos = [s for s in by_sample if s not in set(got)]
    if orphan_captions or orphan_demos:
        raise DataError(
            "sample_id mismatch between captions and demonstration set; "
            f"captions without demos: {orphan_captions}; demos without captions: {orphan_demos}"
        )

    lexicon = None
    if cfg.metrics.get("chair"):
        if "lexicon" in cfg.paths:
            lexicon = load_chair_lexicon(cfg.path("lexicon"))
        else:
            note("no lexicon configured; hallucination columns disabled")

    image_table = _load_embeddings(cfg, "embeddings", "embedding_ids")
    text_table = _load_embeddings(cfg, "text_embeddings", "text_embedding_ids")
    do_clip = cfg.metrics.get("clipscore", True)
    if do_clip and (image_table is None or text_table is None):
        note("image or text embeddings missing; clipscore column disabled")
        do_clip = False

    df, n_docs = build_document_frequency(
        [list(entry.human_captions) for entry in ds.images.values()]
    )

    def score_one(rec):
        sample_id, caption = rec["sample_id"], rec["caption"]
        seq = by_sample[sample_id]
        image_id = seq["query_image_id"]
        row = {"sample_id": sample_id}
        if cfg.metrics.get("cider", True):
            refs = list(ds.human_captions(image_id))
            row["cider"] = cider(caption, refs, df, n_docs)
        if do_clip:
            try:
                row["clipscore"] = clipscore(image_table.row(image_id), text_table.row(sample_id))
            except (DataError, DomainError) as e:
                row["clip_error"] = str(e)
        if cfg.metrics.get("shortcut", True):
            ice_captions = [ice["caption"] for ice in seq["ices"]]
            row["shortcut"] = shortcut_cider(caption, ice_captions)
        if lexicon is not None:
            result = chair([(image_id, caption)], ds, lexicon)
            row["mentions"] = result.rows[0].mentions
            row["hallucinated"] = result.rows[0].hallucinated
        return row

    jobs = max(1, args.jobs)
    if jobs == 1:
        scored = [score_one(rec) for rec in generated]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scored = list(pool.map(score_one, generated))

    for row in scored:
        if "clip_error" in row:
            note(f"clipscore unavailable for {row['sample_id']}: {row.pop('clip_error')}")

    rows = []
    for row in scored:
        mentions = row.get("mentions")
        hallucinated = row.get("hallucinated")
        chair_i = (
            (hallucinated / mentions if mentions else 0.0) if mentions is not None else None
        )
        rows.append(
            [
                row["sample_id"],
                row.get("cider"),
                row.get("clipscore"),
                mentions,
                hallucinated,
                chair_i,
                (hallucinated > 0) if hallucinated is not None else None,
                row.get("shortcut"),
            ]
        )
    write_csv(out_dir / "report.csv", _REPORT_HEADER, rows)

    long_rows = []
    for row in scored:
        for key, metric in (
            ("cider", "cider"),
            ("clipscore", "clipscore"),
            ("shortcut", "shortcut_cider"),
        ):
            if key in row:
                long_rows.append([row["sample_id"], metric, row[key]])
        if "mentions" in row:
            m, h = row["mentions"], row["hallucinated"]
            long_rows.append([row["sample_id"], "chair_i", h / m if m else 0.0])
            long_rows.append([row["sample_id"], "chair_s_flag", float(h > 0)])
    write_csv(out_dir / "metrics.csv", ["sample_id", "metric", "value"], long_rows)

    def column_mean(key):
        values = [row[key] for row in scored if key in row]
        return sum(values) / len(values) if values else None

    aggregates = {}
    if cfg.metrics.get("cider", True):
        aggregates["cider_mean"] = column_mean("cider")
    if do_clip:
        aggregates["clipscore_mean"] = column_mean("clipscore")
    if cfg.metrics.get("shortcut", True):
        aggregates["shortcut_cider_mean"] = column_mean("shortcut")
    if lexicon is not None:
        total_mentions = sum(row["mentions"] for row in scored)
        total_bad = sum(row["hallucinated"] for row in scored)
        aggregates["chair_i"] = total_bad / total_mentions if total_mentions else 0.0
        aggregates["chair_s"] = sum(1 for row in scored if row["hallucinated"]) / len(scored)
    write_json(
        out_dir / "summary.json",
        {
            "n_samples": len(scored),
            "aggregates": aggregates,
            "warnings": warnings_seen,
            "config_echo": cfg.raw_text,
        },
    )
    print(f"scored {len(scored)} captions; report at {out_dir / 'report.csv'}")
    return EXIT_OK


_REPORT_HEADER = [
    "sample_id",
    "cider",
    "clipscore",
    "chair_mentions",
    "chair_hallucinated",
    "chair_i",
    "chair_s_flag",
    "shortcut_cider",
]


# --- attn ----------------------------------------------------------------------


def cmd_attn(args) -> int:
    bundle = load_run(args.run)
    for message in bundle.warnings:
        warn(message)
    out_dir = Path(args.out)
    requested = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for metric in requested:
        if metric not in ("acar", "iear", "vcar"):
            raise DataError(f"unknown metric {metric!r}")

    per_sample_rows: list[list] = []
    by_metric_layer: dict[str, dict[int, list[float]]] = {m: {} for m in requested}

    def eval_sample(sample):
        rows = []
        rec = sample.attention.get("with_query_image")
        if rec is None:
            warn(f"sample {sample.sample_id}: no with_query_image record; skipped")
            return rows
        seg = sample.segmentation
        for metric in requested:
            if metric == "iear" and seg.n_ices < 2:
                warn(f"sample {sample.sample_id}: iear needs >= 2 ICEs; skipped")
                continue
            rec_wo = sample.attention.get("without_query_image")
            if metric == "vcar" and rec_wo is None:
                warn(f"sample {sample.sample_id}: vcar needs both variants; skipped")
                continue
            for layer in range(rec.layer_count):
                if metric == "acar":
                    value = acar(rec, seg, layer)
                elif metric == "iear":
                    value = iear(rec, seg, layer)
                else:
                    value = vcar(rec, rec_wo, seg, layer)
                rows.append([sample.sample_id, layer, metric, value, value == SENTINEL])
        return rows

    jobs = max(1, args.jobs)
    samples = list(bundle.samples.values())
    if jobs == 1:
        chunks = [eval_sample(s) for s in samples]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(eval_sample, samples))
    for chunk in chunks:
        for row in chunk:
            per_sample_rows.append(row)
            _, layer, metric, value, is_sentinel = row
            if not is_sentinel:
                by_metric_layer[metric].setdefault(layer, []).append(value)

    write_csv(
        out_dir / "attn_samples.csv",
        ["sample_id", "layer", "metric", "value", "sentinel_flag"],
        per_sample_rows,
    )

    profile_rows = []
    means: dict[str, float | None] = {}
    for metric in requested:
        layer_values = by_metric_layer[metric]
        layers_present = sorted(
            {row[1] for row in per_sample_rows if row[2] == metric}
        )
        finite_layer_means = []
        for layer in layers_present:
            values = layer_values.get(layer, [])
            if values:
                mean = sum(values) / len(values)
                profile_rows.append([layer, metric, mean, False])
                finite_layer_means.append(mean)
            else:
                profile_rows.append([layer, metric, SENTINEL, True])
        means[metric] = (
            sum(finite_layer_means) / len(finite_layer_means) if finite_layer_means else None
        )
    write_csv(
        out_dir / "attn_profile.csv",
        ["layer", "metric", "value", "sentinel_flag"],
        profile_rows,
    )
    write_json(out_dir / "attn_summary.json", {"means": means, "metrics": requested})
    print(f"wrote attention profiles for {len(samples)} samples to {out_dir}")
    return EXIT_OK


# --- plan ----------------------------------------------------------------------


def _parse_layers(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise DataError(f"layer range must look like A:B, got {text!r}")


def cmd_plan(args) -> int:
    seg = load_segmentation(args.seg)
    cfg = ModelCfg(
        n_layers=args.n_layers,
        n_heads=args.n_heads,
        head_dim=args.head_dim,
        kv_bytes_per_element=args.kv_bytes,
    )
    out_dir = Path(args.out)
    full_len = len(seg)
    baseline_bytes, _ = kv_estimate(cfg, None, full_len)

    if args.kind in ("anchor", "context"):
        start, end = _parse_layers(args.layers)
        builder = anchor_mask if args.kind == "anchor" else context_mask
        plan = builder(seg, start, end, n_layers=cfg.n_layers)
        write_tensor_file(
            Tensor("f16", plan.restricted.astype("float32")), out_dir / "mask.iclt"
        )
        write_json(
            out_dir / "plan.json",
            {
                "kind": plan.kind,
                "layer_start": plan.layer_start,
                "layer_end": plan.layer_end,
                "n_layers": plan.n_layers,
                "seq_len": plan.seq_len,
                "mask_tensor": "mask.iclt",
                "note": "layers outside the range use the plain causal mask",
            },
        )
        print(f"kind: {plan.kind}  layers {plan.layer_start}:{plan.layer_end}")
        print(f"seq_len {plan.seq_len}  baseline_kv_bytes {baseline_bytes}")
        print(f"allowed pairs in range: {int(plan.restricted.sum())}")
    elif args.kind == "prune":
        plan = prune_plan(
            seg,
            prune_layer=args.prune_layer,
            recover=args.recover,
            prediction_layer=args.prediction_layer,
            n_layers=cfg.n_layers,
        )
        total_bytes, savings = kv_estimate(cfg, plan, full_len)
        write_json(
            out_dir / "plan.json",
            {
                "kind": "prune",
                "prune_layer": plan.prune_layer,
                "prediction_layer": plan.prediction_layer,
                "recover": plan.recover,
                "kept_indices": list(plan.kept_indices),
                "full_len": plan.full_len,
                "n_layers": plan.n_layers,
                "effective_lengths": list(plan.effective_lengths),
            },
        )
        print(f"kind: prune  k={plan.prune_layer} p={plan.prediction_layer} recover={plan.recover}")
        print(f"kept {len(plan.kept_indices)} of {plan.full_len} tokens")
        print("layer effective_len")
        for layer, length in enumerate(plan.effective_lengths):
            print(f"{layer:5d} {length}")
        print(f"baseline_kv_bytes {baseline_bytes}")
        print(f"plan_kv_bytes {total_bytes}")
        print(f"savings {savings:.4f}")
    else:
        raise DataError(f"unknown plan kind {args.kind!r}")
    return EXIT_OK


# --- synth ---------------------------------------------------------------------


def cmd_synth(args) -> int:
    obj = load_json(args.spec, "synth spec")
    out_dir = Path(args.out)
    if "segmentation" in obj and isinstance(obj["segmentation"], list):
        seg = TokenSegmentation.from_records(obj["segmentation"])
    else:
        from .segmentation import canonical_segmentation

        seg = canonical_segmentation(
            int(obj.get("n_ices", 4)), int(obj.get("context_per_ice", 1))
        )
    base = {
        "n_layers": int(obj.get("n_layers", 2)),
        "n_heads": int(obj.get("n_heads", 1)),
        "anchor": float(obj.get("anchor", 0.0)),
        "window": float(obj.get("window", 0.0)),
        "noise": float(obj.get("noise", 0.0)),
        "seed": int(obj.get("seed", 0)) if args.seed is None else args.seed,
    }
    variants_obj = obj.get("variants", ["with_query_image"])
    if isinstance(variants_obj, list):
        variants = {name: {} for name in variants_obj}
    else:
        variants = {name: dict(overrides) for name, overrides in variants_obj.items()}

    sample_id = str(obj.get("sample_id", "synth0"))
    out_dir.mkdir(parents=True, exist_ok=True)
    save_segmentation(seg, out_dir / f"{sample_id}.seg.json")
    attention_entry = {}
    for name, overrides in variants.items():
        spec = SynthSpec(seg=seg, **{**base, **overrides})
        rec = gen_attention(spec, variant=name, sample_id=sample_id)
        filename = f"{sample_id}.{name}.iclt"
        write_tensor_file(rec.tensor, out_dir / filename)
        attention_entry[name] = filename
    write_json(
        out_dir / "manifest.json",
        {
            "version": 1,
            "model": {
                "name": "iclens-synth",
                "n_layers": base["n_layers"],
                "n_heads": base["n_heads"],
                "head_dim": int(obj.get("head_dim", 64)),
                "kv_bytes_per_element": int(obj.get("kv_bytes_per_element", 2)),
                "attention_dtype": "f32",
                "generation": {"shot_count": seg.n_ices},
            },
            "samples": [
                {
                    "sample_id": sample_id,
                    "seq_len": len(seg),
                    "segmentation": f"{sample_id}.seg.json",
                    "attention": attention_entry,
                }
            ],
            "files": {},
        },
    )
    print(f"wrote synthetic run to {out_dir}")
    return EXIT_OK


# --- validate --------------------------------------------------------------------


def cmd_validate(args) -> int:
    bundle = load_run(args.run)
    for message in bundle.warnings:
        warn(message)
    print(
        f"OK: {len(bundle.samples)} samples, "
        f"{len(bundle.warnings)} warnings, model layers={bundle.model.n_layers}"
    )
    return EXIT_OK


# --- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"usage error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iclens", description=__doc__)
    parser.add_argument("--version", action="version", version=f"iclens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        if out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers per sample")
        p.add_argument("--format", default="csv", choices=["csv"], help="report format")

    p_build = sub.add_parser("build", help="construct demonstration sequences")
    p_build.add_argument("--config", required=True)
    common(p_build)
    p_build.set_defaults(fn=cmd_build)

    p_score = sub.add_parser("score", help="score generated captions")
    p_score.add_argument("--config", required=True)
    p_score.add_argument("--generated", help="generated captions file (overrides config)")
    common(p_score)
    p_score.set_defaults(fn=cmd_score)

    p_attn = sub.add_parser("attn", help="per-layer attention metrics for a run")
    p_attn.add_argument("--run", required=True, help="run manifest path")
    p_attn.add_argument("--metrics", default="acar,iear,vcar")
    common(p_attn)
    p_attn.set_defaults(fn=cmd_attn)

    p_plan = sub.add_parser("plan", help="emit mask/prune plans and cache estimates")
    p_plan.add_argument("--seg", required=True, help="segmentation file")
    p_plan.add_argument("--kind", required=True, choices=["anchor", "context", "prune"])
    p_plan.add_argument("--layers", default="0:0", help="mask layer range A:B")
    p_plan.add_argument("--prune-layer", type=int, default=0)
    p_plan.add_argument("--prediction-layer", type=int, default=1)
    p_plan.add_argument("--recover", action="store_true")
    p_plan.add_argument("--n-layers", type=int, required=True)
    p_plan.add_argument("--n-heads", type=int, required=True)
    p_plan.add_argument("--head-dim", type=int, required=True)
    p_plan.add_argument("--kv-bytes", type=int, default=2)
    common(p_plan)
    p_plan.set_defaults(fn=cmd_plan)

    p_synth = sub.add_parser("synth", help="generate a synthetic run bundle")
    p_synth.add_argument("--spec", required=True, help="synth spec file")
    common(p_synth)
    p_synth.set_defaults(fn=cmd_synth)

    p_val = sub.add_parser("validate", help="load and fully validate a run bundle")
    p_val.add_argument("--run", required=True, help="run manifest path")
    common(p_val, out=False)
    p_val.set_defaults(fn=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.fn(args)
    except IclensError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
