"""
ACRNN 툴킷 환경 설정.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# .env 파일 로드
load_dotenv()

class Config:
    """
    툴킷의 모든 환경 변수 및 기본 경로를 관리하는 정적 클래스.

    실험 하이퍼파라미터는 run_config.RunConfig(INI 파일)로 관리하고,
    여기에는 실행 환경에 종속된 값만 둡니다.
    """

    # 1. 기본 경로
    BASE_DIR = Path(__file__).parent
    PROJECT_DIR = BASE_DIR.parent

    # 2. 로깅 설정
    LOG_DIR = Path(os.getenv("ACRNN_LOG_DIR", str(PROJECT_DIR / "logs")))
    LOG_LEVEL = os.getenv("ACRNN_LOG_LEVEL", "INFO")
    EXECUTION_LOG_ENABLED = os.getenv("ACRNN_EXECUTION_LOG", "1") == "1"

    # 3. 오디오/특징 추출 설정
    TARGET_SAMPLE_RATE = int(os.getenv("ACRNN_SAMPLE_RATE", "44100"))
    DEFAULT_JOBS = int(os.getenv("ACRNN_JOBS", "1"))

    # 4. 데이터 및 산출물 경로
    DATASET_ROOT = os.getenv("ACRNN_DATASET_ROOT", "")
    FEATURE_STORE = os.getenv("ACRNN_FEATURE_STORE", "")
    CHECKPOINT_PATH = os.getenv("ACRNN_CHECKPOINT", "")
    REPORT_DIR = os.getenv("ACRNN_REPORT_DIR", str(PROJECT_DIR / "reports"))

    # 5. 추론 서버 설정
    SERVER_HOST = os.getenv("ACRNN_SERVER_HOST", "127.0.0.1")
    SERVER_PORT = int(os.getenv("ACRNN_SERVER_PORT", "8000"))
