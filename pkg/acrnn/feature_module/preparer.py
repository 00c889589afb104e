"""
데이터셋 준비 파이프라인
- 매니페스트 로드 → 클립별 특징 추출(+ 증강 사본) 병렬 실행 → 특징 저장소 기록
- 오프라인 증강 WAV + 매니페스트 CSV 생성
"""

import asyncio
import csv
import logging
import time
from collections import Counter
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field

from ..audio_module.audio_io import load_clip, load_manifest, resolve_audio_path, write_clip
from ..audio_module.augmentation import augment_clip, clip_rng
from ..audio_module.schemas import AugmentPlan
from ..shared.errors import AudioIOError
from ..shared.logger_utils import log_execution
from ..shared.schemas import ClipMeta, DatasetManifest
from .extractor import FeatureExtractor
from .feature_store import partial_path, read_store, store_is_complete, write_store
from .schemas import FeatureConfig, LogGtSegment

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class PrepareSummary(BaseModel):
    """특징 저장소 준비 결과."""
    store: str = Field(..., description="저장소 경로")
    up_to_date: bool = Field(False, description="이미 완성된 저장소여서 건너뛰었는지 여부")
    total_segments: int = Field(0, ge=0)
    augmented_segments: int = Field(0, ge=0)
    segments_per_fold: Dict[int, int] = Field(default_factory=dict)
    processing_time_ms: float = Field(0.0)


def count_by_fold(segments: List[LogGtSegment]) -> Dict[int, int]:
    counts = Counter(s.fold for s in segments)
    return {fold: counts[fold] for fold in sorted(counts)}


class FeaturePreparer:
    """
    매니페스트의 모든 클립에서 Log-GTs를 추출해 특징 저장소로 기록하는 클래스.

    클립 단위 작업은 asyncio.to_thread로 병렬 실행하며 결과 순서는 매니페스트 순서를 따릅니다.
    증강 난수는 (plan.seed, 클립 인덱스)에서 파생되므로 jobs 수와 무관하게 재현됩니다.
    """

    def __init__(self, feature_cfg: FeatureConfig = None, plan: Optional[AugmentPlan] = None, jobs: int = 1):
        self.feature_cfg = feature_cfg or FeatureConfig()
        self.plan = plan or AugmentPlan()
        self.jobs = max(1, int(jobs))
        self.extractor = FeatureExtractor(self.feature_cfg)

    def _extract_clip(self, root: str, index: int, meta: ClipMeta, augment: bool) -> List[LogGtSegment]:
        clip = load_clip(resolve_audio_path(root, meta.path), self.feature_cfg.sample_rate_hz)
        segments = self.extractor.extract(clip, meta)
        if augment:
            for copy, provenance in augment_clip(clip, self.plan, clip_rng(self.plan, index)):
                segments += self.extractor.extract(copy, meta, provenance=provenance)
        return segments

    async def _extract_all(self, manifest: DatasetManifest, augment: bool) -> List[LogGtSegment]:
        semaphore = asyncio.Semaphore(self.jobs)

        async def run(index: int, meta: ClipMeta):
            async with semaphore:
                return await asyncio.to_thread(self._extract_clip, manifest.root, index, meta, augment)

        results = await asyncio.gather(*(run(i, meta) for i, meta in enumerate(manifest.clips)))
        return [segment for clip_segments in results for segment in clip_segments]

    @log_execution(module_name="features", step_name="prepare")
    async def prepare(
        self,
        dataset_root: PathLike,
        store_path: PathLike,
        augment: bool = False,
        subset: Optional[str] = None,
        force: bool = False,
    ) -> PrepareSummary:
        """
        데이터셋 전체를 특징 저장소로 변환합니다.

        Args:
            dataset_root (PathLike): 데이터셋 루트.
            store_path (PathLike): 출력 저장소 경로.
            augment (bool): time stretch / pitch shift 사본 추가 여부.
            subset (Optional[str]): "esc10" 부분집합.
            force (bool): 완성된 저장소가 있어도 다시 만들지 여부.

        Returns:
            PrepareSummary: 폴드별 세그먼트 수.

        Raises:
            AudioIOError: 데이터셋 루트가 없는 경우 (작업 시작 전).
            FeatureExtractionError: 클립 추출 실패 시 (저장소는 .partial 표시로 남음).
        """
        start_time = time.time()
        store_path = Path(store_path)
        if not Path(dataset_root).is_dir():
            raise AudioIOError(f"데이터셋 루트를 찾을 수 없습니다: {dataset_root}")

        if store_is_complete(store_path) and not force:
            segments = read_store(store_path)
            logger.info(f"특징 저장소가 최신 상태입니다 (up to date): {store_path}")
            return PrepareSummary(
                store=str(store_path),
                up_to_date=True,
                total_segments=len(segments),
                augmented_segments=sum(not s.is_original for s in segments),
                segments_per_fold=count_by_fold(segments),
            )

        # 1단계: 매니페스트 로드
        logger.info("Step 1/3: 매니페스트 로드")
        manifest = load_manifest(dataset_root, subset=subset)

        # 2단계: 클립별 특징 추출 (병렬)
        logger.info(f"Step 2/3: 특징 추출 ({len(manifest.clips)}개 클립, jobs={self.jobs}, augment={augment})")
        store_path.parent.mkdir(parents=True, exist_ok=True)
        partial_path(store_path).touch()
        segments = await self._extract_all(manifest, augment)

        # 3단계: 저장소 기록
        logger.info("Step 3/3: 특징 저장소 기록")
        write_store(store_path, segments)

        summary = PrepareSummary(
            store=str(store_path),
            total_segments=len(segments),
            augmented_segments=sum(not s.is_original for s in segments),
            segments_per_fold=count_by_fold(segments),
            processing_time_ms=(time.time() - start_time) * 1000,
        )
        logger.info(f"특징 저장소 준비 완료: {summary.total_segments}개 세그먼트 {summary.segments_per_fold}")
        return summary


AUGMENTED_COLUMNS = ("filename", "fold", "target", "category", "provenance")


def _augment_one(root: str, index: int, meta: ClipMeta, plan: AugmentPlan, out_dir: Path, sample_rate: int):
    clip = load_clip(resolve_audio_path(root, meta.path), sample_rate)
    rows = []
    stem = Path(meta.path).stem
    for k, (copy, provenance) in enumerate(augment_clip(clip, plan, clip_rng(plan, index))):
        filename = f"{stem}__aug{k}.wav"
        write_clip(out_dir / "audio" / filename, copy)
        rows.append((filename, meta.fold, meta.class_id, meta.class_name, f"{meta.path}|{provenance}"))
    return rows


@log_execution(module_name="augmentation", step_name="augment_dataset")
async def augment_dataset(
    dataset_root: PathLike,
    out_dir: PathLike,
    plan: AugmentPlan,
    exclude_fold: Optional[int] = None,
    subset: Optional[str] = None,
    sample_rate_hz: int = 44100,
    jobs: int = 1,
) -> Tuple[Path, int]:
    """
    학습 폴드 클립의 증강 WAV와 provenance 컬럼이 있는 매니페스트 CSV를 씁니다.

    Args:
        dataset_root (PathLike): 원본 데이터셋 루트.
        out_dir (PathLike): 출력 디렉토리 (audio/, meta/augmented.csv).
        plan (AugmentPlan): 증강 계획.
        exclude_fold (Optional[int]): 제외할 테스트 폴드.
        subset (Optional[str]): "esc10" 부분집합.
        sample_rate_hz (int): 처리 샘플링 레이트.
        jobs (int): 병렬 작업 수.

    Returns:
        Tuple[Path, int]: (매니페스트 CSV 경로, 생성된 클립 수).
    """
    manifest = load_manifest(dataset_root, subset=subset)
    out_dir = Path(out_dir)
    targets = [(i, c) for i, c in enumerate(manifest.clips) if c.fold != exclude_fold]
    semaphore = asyncio.Semaphore(max(1, int(jobs)))

    async def run(index: int, meta: ClipMeta):
        async with semaphore:
            return await asyncio.to_thread(
                _augment_one, manifest.root, index, meta, plan, out_dir, sample_rate_hz
            )

    results = await asyncio.gather(*(run(i, c) for i, c in targets))
    csv_path = out_dir / "meta" / "augmented.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(AUGMENTED_COLUMNS)
        for rows in results:
            writer.writerows(rows)
            count += len(rows)
    logger.info(f"증강 데이터 생성 완료: {count}개 클립 → {out_dir}")
    return csv_path, count
