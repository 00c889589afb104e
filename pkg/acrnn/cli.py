"""
ACRNN 명령행 인터페이스

    python -m acrnn prepare | augment | train | cv | eval | attn-viz | complexity | serve

종료 코드: 0 성공, 2 인자/설정 오류, 3 입출력 오류, 4 수치 오류, 1 기타.
"""

import argparse
import asyncio
import csv
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from PIL import Image

from . import __version__
from .audio_module.audio_io import load_clip
from .config import Config
from .feature_module.extractor import FeatureExtractor, apply_norm, fit_norm
from .feature_module.feature_store import load_norm_stats, read_store, save_norm_stats
from .feature_module.preparer import FeaturePreparer, augment_dataset
from .feature_module.schemas import FeatureConfig, LogGtSegment
from .model_module.complexity import count_flops, count_params
from .model_module.schemas import AcrnnConfig, AttentionRecord, ablation_grid
from .run_config import RunConfig, load_run_config, require_path
from .shared.errors import AcrnnError, ArgumentError
from .shared.logger_utils import setup_logging
from .train_module.checkpoint import load_checkpoint, model_from_checkpoint, save_checkpoint
from .train_module.evaluator import (
    cross_validate,
    evaluate,
    split_segments,
    write_confusion_csv,
    write_report_json,
)
from .train_module.schemas import Checkpoint, CrossValidationReport
from .train_module.trainer import train_fold

logger = logging.getLogger(__name__)

# 히트맵 하단 어텐션 띠 높이 (픽셀)
HEATMAP_WEIGHT_ROWS = 16


# ----------------------------------------------------------------------
# 공통 보조 함수
# ----------------------------------------------------------------------

def _refuse_clobber(paths: Sequence[Path], force: bool) -> None:
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not force:
        raise ArgumentError(f"출력 파일이 이미 있습니다 (덮어쓰려면 --force): {', '.join(existing)}")


def _load_config(args: argparse.Namespace) -> RunConfig:
    return load_run_config(
        args.config,
        overrides=args.set,
        seed=args.seed,
        epochs=getattr(args, "epochs", None),
    )


def _load_segments(cfg: RunConfig, store: Optional[str]) -> List[LogGtSegment]:
    path = require_path(store or cfg.paths.feature_store, "특징 저장소")
    segments = read_store(path)
    if not segments:
        raise ArgumentError(f"특징 저장소가 비어 있습니다: {path}")
    return segments


def _class_names(segments: Sequence[LogGtSegment]) -> List[str]:
    names: Dict[int, str] = {}
    for seg in segments:
        if seg.clip is not None:
            names.setdefault(seg.class_id, seg.clip.class_name)
    return [names.get(c, str(c)) for c in range(max(names) + 1)] if names else []


def _fit_model_to_store(model_cfg: AcrnnConfig, segments: Sequence[LogGtSegment]) -> AcrnnConfig:
    """설정 파일이 num_classes를 지정하지 않았으면 저장소의 클래스 수를 사용합니다."""
    if "num_classes" in model_cfg.model_fields_set:
        return model_cfg
    num_classes = max(s.class_id for s in segments) + 1
    return model_cfg.model_copy(update={"num_classes": max(num_classes, 2)})


def _check_fold(fold: int, segments: Sequence[LogGtSegment]) -> None:
    folds = sorted({s.fold for s in segments})
    if fold not in folds:
        raise ArgumentError(f"폴드 {fold}가 저장소에 없습니다 (사용 가능: {folds})")


# ----------------------------------------------------------------------
# 명령
# ----------------------------------------------------------------------

def cmd_prepare(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    root = require_path(args.dataset_root or cfg.paths.dataset_root, "데이터셋 루트", kind="dir")
    store = args.out or cfg.paths.feature_store
    if not store:
        raise ArgumentError("특징 저장소 출력 경로가 필요합니다 (--out)")

    preparer = FeaturePreparer(cfg.features, cfg.augment, jobs=args.jobs)
    summary = asyncio.run(
        preparer.prepare(root, store, augment=args.augment, subset=args.subset or cfg.paths.subset, force=args.force)
    )
    if summary.up_to_date:
        print(f"up to date: {summary.store}")
    for fold, count in summary.segments_per_fold.items():
        print(f"fold {fold}: {count} segments")
    print(f"total: {summary.total_segments} segments ({summary.augmented_segments} augmented)")
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    root = require_path(args.dataset_root or cfg.paths.dataset_root, "데이터셋 루트", kind="dir")
    out_dir = Path(args.out)
    _refuse_clobber([out_dir / "meta" / "augmented.csv"], args.force)

    csv_path, count = asyncio.run(
        augment_dataset(
            root,
            out_dir,
            cfg.augment,
            exclude_fold=args.exclude_fold,
            subset=args.subset or cfg.paths.subset,
            sample_rate_hz=cfg.features.sample_rate_hz,
            jobs=args.jobs,
        )
    )
    print(f"{count} augmented clips → {csv_path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    segments = _load_segments(cfg, args.store)
    _check_fold(args.fold, segments)
    report_dir = Path(args.report_dir or cfg.paths.report_dir)
    checkpoint_path = Path(args.out or cfg.paths.checkpoint or report_dir / f"fold{args.fold}.ckpt")
    report_path = report_dir / f"fold{args.fold}_report.json"
    confusion_path = report_dir / f"fold{args.fold}_confusion.csv"
    norm_path = report_dir / f"norm_fold{args.fold}.txt"
    _refuse_clobber([checkpoint_path, report_path, confusion_path, norm_path], args.force)

    model_cfg = _fit_model_to_store(cfg.model, segments)
    class_names = _class_names(segments)
    train, test = split_segments(segments, args.fold)
    stats = fit_norm(train)
    result = train_fold(train, cfg.train, model_cfg, stats, cfg.features, class_names, fold=args.fold)
    report = evaluate(result.model, test, stats, model_cfg.num_classes, fold=args.fold)

    save_checkpoint(checkpoint_path, result.checkpoint)
    write_report_json(report_path, report)
    write_confusion_csv(confusion_path, report, class_names)
    save_norm_stats(norm_path, stats)
    print(f"fold {args.fold}: accuracy {report.accuracy * 100:.1f}% ({len(report.predictions)} clips)")
    print(f"checkpoint: {checkpoint_path}")
    return 0


def _print_cv(report: CrossValidationReport) -> None:
    for fold, accuracy in report.fold_accuracies.items():
        print(f"  fold {fold}: {accuracy * 100:.1f}%")
    print(f"{report.setting or 'acrnn'}: mean accuracy {report.mean_accuracy * 100:.1f}%")


def write_ablation_csv(path: Path, reports: Sequence[CrossValidationReport]) -> Path:
    """setting,mean_accuracy,fold_1..fold_K"""
    folds = sorted({f for r in reports for f in r.fold_accuracies})
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["setting", "mean_accuracy", *[f"fold_{k}" for k in folds]])
        for report in reports:
            accs = report.fold_accuracies
            writer.writerow(
                [report.setting, f"{report.mean_accuracy:.6f}", *[f"{accs[k]:.6f}" if k in accs else "" for k in folds]]
            )
    return path


def cmd_cv(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    segments = _load_segments(cfg, args.store)
    out_dir = Path(args.out or cfg.paths.report_dir)
    model_cfg = _fit_model_to_store(cfg.model, segments)
    class_names = _class_names(segments)
    settings = ablation_grid(model_cfg) if args.ablation else [model_cfg]

    outputs = [out_dir / f"cv_{s.setting_label}.json" for s in settings]
    if args.ablation:
        outputs.append(out_dir / "ablation.csv")
    _refuse_clobber(outputs, args.force)

    reports = []
    for step, setting in enumerate(settings, start=1):
        logger.info(f"Setting {step}/{len(settings)}: {setting.setting_label}")
        report = cross_validate(segments, setting, cfg.train, cfg.features, class_names)
        write_report_json(out_dir / f"cv_{setting.setting_label}.json", report)
        for fold in report.folds:
            write_confusion_csv(
                out_dir / f"cv_{setting.setting_label}_fold{fold.fold}_confusion.csv", fold.report, class_names
            )
            save_norm_stats(out_dir / f"norm_fold{fold.fold}.txt", fold.norm_stats)
        _print_cv(report)
        reports.append(report)

    if args.ablation:
        path = write_ablation_csv(out_dir / "ablation.csv", reports)
        print(f"ablation table: {path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    checkpoint = load_checkpoint(require_path(args.checkpoint or cfg.paths.checkpoint, "체크포인트"))
    segments = _load_segments(cfg, args.store)
    _check_fold(args.fold, segments)
    _, test = split_segments(segments, args.fold)

    norm_stats = load_norm_stats(require_path(args.norm_stats, "정규화 통계")) if args.norm_stats else None
    report = evaluate(checkpoint, test, norm_stats, fold=args.fold)
    print(f"fold {args.fold}: accuracy {report.accuracy * 100:.1f}% ({len(report.predictions)} clips)")
    if args.out:
        _refuse_clobber([Path(args.out)], args.force)
        write_report_json(args.out, report)
    return 0


def attention_rows(record: AttentionRecord) -> List[tuple]:
    """(segment_id, t, weight) 행"""
    return [
        (segment_id, t, float(weight))
        for segment_id, weights in enumerate(record.weights)
        for t, weight in enumerate(weights)
    ]


def _to_gray(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    scale = (values - lo) / (hi - lo) if hi > lo else np.zeros_like(values)
    return np.round(scale * 255).astype(np.uint8)


def render_heatmap(segments: Sequence[LogGtSegment], record: AttentionRecord) -> np.ndarray:
    """
    상단: static Log-GTs (저주파가 아래), 하단: 프레임 축으로 늘린 어텐션 가중치 띠.
    세그먼트는 시간축으로 이어 붙입니다.
    """
    spec = np.concatenate([s.data[:, :, 0] for s in segments], axis=0).T[::-1]
    frames = segments[0].data.shape[0]
    strips = []
    for weights in record.weights:
        steps = weights.shape[0]
        strips.append(weights[(np.arange(frames) * steps) // frames])
    strip = np.concatenate(strips)
    peak = strip.max()
    strip = strip / peak if peak > 0 else strip
    band = np.tile(np.round(strip * 255).astype(np.uint8), (HEATMAP_WEIGHT_ROWS, 1))
    return np.vstack([_to_gray(spec), band])


def cmd_attn_viz(args: argparse.Namespace) -> int:
    checkpoint: Checkpoint = load_checkpoint(require_path(args.checkpoint, "체크포인트"))
    if not checkpoint.model_cfg.has_attention:
        raise ArgumentError("어텐션이 없는 체크포인트입니다 (attention_site=none): 시각화할 가중치가 없습니다")
    clip_path = require_path(args.clip, "오디오 클립")
    out_dir = Path(args.out)
    csv_path, pgm_path = out_dir / "attention.csv", out_dir / "heatmap.pgm"
    _refuse_clobber([csv_path, pgm_path], args.force)

    feature_cfg = checkpoint.meta.features or FeatureConfig()
    extractor = FeatureExtractor(feature_cfg)
    segments = extractor.extract(load_clip(clip_path, feature_cfg.sample_rate_hz))
    normalized = [apply_norm(s, checkpoint.norm_stats) for s in segments]
    model = model_from_checkpoint(checkpoint)
    batch = np.stack([s.data for s in normalized]).astype(checkpoint.model_cfg.numpy_dtype)
    _, record = model.forward(batch, training=False, record_attention=True)

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["segment_id", "t", "weight"])
        writer.writerows((seg, t, f"{w:.8f}") for seg, t, w in attention_rows(record))
    Image.fromarray(render_heatmap(segments, record)).save(pgm_path)
    print(f"attention ({record.site}, {record.scaling}): {csv_path}, {pgm_path}")
    return 0


def format_complexity(cfg: AcrnnConfig) -> List[str]:
    report = count_flops(cfg)
    lines = [f"setting: {report.setting}", f"{'layer':<10}{'params':>14}{'flops':>16}"]
    for row in report.rows:
        lines.append(f"{row.layer:<10}{row.params:>14,}{row.flops:>16,}")
    lines.append(f"{'total':<10}{report.total_params:>14,}{report.total_flops:>16,}")
    lines.append(
        f"attention overhead: {report.attention_params:,} params, {report.attention_flops:,} flops "
        f"({report.attention_flops / report.total_flops * 100:.3f}%)"
    )
    for name, ref in (report.reference or {}).items():
        flops = ref.get("flops_m_with_attention", ref.get("flops_m"))
        lines.append(f"reference {name}: {ref['params_m']} M params, {flops} M flops")
    return lines


def cmd_complexity(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if args.ablation:
        print(f"{'setting':<14}{'params':>14}{'flops':>16}")
        for setting in ablation_grid(cfg.model):
            report = count_flops(setting)
            print(f"{setting.setting_label:<14}{count_params(setting):>14,}{report.total_flops:>16,}")
        return 0
    print("\n".join(format_complexity(cfg.model)))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .main import app

    if args.checkpoint:
        Config.CHECKPOINT_PATH = args.checkpoint
    uvicorn.run(app, host=args.host or Config.SERVER_HOST, port=args.port or Config.SERVER_PORT)
    return 0


# ----------------------------------------------------------------------
# 파서
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI 실험 설정 파일")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="설정 덮어쓰기")
    common.add_argument("--seed", type=int, help="학습/모델/증강 시드")
    common.add_argument("--jobs", type=int, default=Config.DEFAULT_JOBS, help="병렬 작업 수")
    common.add_argument("--force", action="store_true", help="기존 출력 덮어쓰기")
    common.add_argument("--log-level", default=None, help="로그 레벨 (기본값: ACRNN_LOG_LEVEL)")

    parser = argparse.ArgumentParser(prog="acrnn", description="ACRNN 환경음 분류 툴킷")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[common], help="Log-GTs 특징 저장소 생성")
    p.add_argument("--dataset-root")
    p.add_argument("--out", help="특징 저장소 경로")
    p.add_argument("--augment", action="store_true", help="time stretch / pitch shift 사본 포함")
    p.add_argument("--subset", choices=["esc10"])
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("augment", parents=[common], help="증강 WAV + 매니페스트 생성")
    p.add_argument("--dataset-root")
    p.add_argument("--out", required=True, help="출력 디렉토리")
    p.add_argument("--exclude-fold", type=int, help="제외할 테스트 폴드")
    p.add_argument("--subset", choices=["esc10"])
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", parents=[common], help="한 폴드 학습 + 평가")
    p.add_argument("--store")
    p.add_argument("--fold", type=int, required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", help="체크포인트 경로")
    p.add_argument("--report-dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", parents=[common], help="k-fold 교차 검증")
    p.add_argument("--store")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", help="보고서 디렉토리")
    p.add_argument("--ablation", action="store_true", help="어텐션 위치/스케일링 11개 설정 실행")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("eval", parents=[common], help="체크포인트를 한 폴드에서 평가")
    p.add_argument("--checkpoint")
    p.add_argument("--store")
    p.add_argument("--fold", type=int, required=True)
    p.add_argument("--out", help="JSON 보고서 경로")
    p.add_argument("--norm-stats", help="정규화 통계 파일 (기본값: 체크포인트에 저장된 값)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attn-viz", parents=[common], help="어텐션 가중치 CSV + PGM 히트맵")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clip", required=True)
    p.add_argument("--out", required=True, help="출력 디렉토리")
    p.set_defaults(func=cmd_attn_viz)

    p = sub.add_parser("complexity", parents=[common], help="층별 파라미터 / FLOPs")
    p.add_argument("--ablation", action="store_true")
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("serve", parents=[common], help="HTTP 추론 서버 실행")
    p.add_argument("--checkpoint")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    명령을 실행하고 종료 코드를 반환합니다.

    AcrnnError는 한 줄 메시지와 해당 종료 코드로 변환됩니다.
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.func(args)
    except AcrnnError as e:
        logger.error(f"{args.command} 실패: {e}", exc_info=logger.isEnabledFor(logging.DEBUG))
        print(f"acrnn {args.command}: error: {e}", file=sys.stderr)
        return e.exit_code
