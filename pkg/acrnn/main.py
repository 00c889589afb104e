"""ACRNN Inference API"""

import asyncio
import logging
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from dotenv import load_dotenv

from . import __version__
from .config import Config
from .shared.errors import AcrnnError, ArgumentError, AudioFormatError, AudioIOError, FeatureExtractionError
from .shared.schemas import ClassifyRequest, ClassifyResponse, ErrorResponse, HealthResponse
from .train_module.classifier import ClipClassifier

# 환경 변수 로드
load_dotenv()

# 로깅 설정
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

app = FastAPI(
    title="ACRNN Inference Server",
    description="Environmental Sound Classification API",
    version=__version__
)

# CORS 설정
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# 분류기 인스턴스 (싱글톤, 첫 요청 시 로드)
_classifier: Optional[ClipClassifier] = None
_classifier_path: Optional[str] = None


def get_classifier() -> ClipClassifier:
    """
    Config.CHECKPOINT_PATH의 체크포인트로 분류기를 로드합니다 (경로가 바뀌면 다시 로드).

    Raises:
        AudioIOError: 체크포인트 경로가 설정되지 않았거나 파일이 없는 경우.
    """
    global _classifier, _classifier_path
    path = Config.CHECKPOINT_PATH
    if not path:
        raise AudioIOError("체크포인트 경로가 설정되지 않았습니다 (ACRNN_CHECKPOINT)")
    if _classifier is None or _classifier_path != path:
        _classifier = ClipClassifier.from_path(path)
        _classifier_path = path
    return _classifier


def _error(status_code: int, error: str, e: Exception) -> HTTPException:
    return HTTPException(
        status_code=status_code,
        detail=ErrorResponse(error=error, detail=str(e)).model_dump(),
    )


@app.get("/api/health", response_model=HealthResponse)
async def health():
    """
    서버 상태 확인 엔드포인트.

    Returns:
        HealthResponse: 상태, 버전, 체크포인트 로드 여부.
    """
    return HealthResponse(status="healthy", version=__version__, model_loaded=_classifier is not None)


@app.post("/api/classify", response_model=ClassifyResponse)
async def classify(request: ClassifyRequest):
    """
    오디오 클립 분류 엔드포인트.

    Args:
        request (ClassifyRequest): 분류할 클립 경로.

    Returns:
        ClassifyResponse: 클래스 분포, 예측 클래스 이름, 어텐션 가중치.

    Raises:
        HTTPException: 400 (잘못된 입력, 디코딩/특징 추출 실패), 404 (파일 없음), 500 (기타 오류).
    """
    logger.info(f"분류 요청 수신: {request.clip_path}")
    try:
        classifier = get_classifier()
        return await asyncio.to_thread(classifier.classify, request.clip_path)
    except (ArgumentError, AudioFormatError, FeatureExtractionError) as e:
        logger.warning(f"잘못된 분류 요청: {e}")
        raise _error(400, "잘못된 입력입니다", e)
    except AudioIOError as e:
        logger.warning(f"파일 오류: {e}")
        raise _error(404, "파일을 읽을 수 없습니다", e)
    except AcrnnError as e:
        logger.error(f"분류 실패: {e}", exc_info=True)
        raise _error(500, "분류 중 오류가 발생했습니다", e)


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host=Config.SERVER_HOST, port=Config.SERVER_PORT)
