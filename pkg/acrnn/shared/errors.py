"""
공통 예외 계층.

모든 예외는 CLI 종료 코드(exit_code)를 가지며, 파이프라인 각 단계는
오류를 로깅한 뒤 그대로 다시 던집니다.
"""

from typing import Optional


class AcrnnError(Exception):
    """ACRNN 툴킷의 기본 예외."""

    exit_code = 1


class ArgumentError(AcrnnError, ValueError):
    """잘못된 인자 또는 범위를 벗어난 값."""

    exit_code = 2


class ShapeError(ArgumentError):
    """텐서/행렬의 차원이 맞지 않는 경우."""


class EmptyInputError(ArgumentError):
    """길이가 0이거나 처리 단위보다 짧은 입력."""


class ConfigError(ArgumentError):
    """
    설정 파일 파싱/검증 오류.

    Args:
        message (str): 오류 설명.
        line (Optional[int]): 문제가 된 설정 파일의 줄 번호 (1부터 시작).
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"{line}번째 줄: " if line is not None else ""
        super().__init__(prefix + message)


class ManifestParseError(ArgumentError):
    """
    매니페스트 CSV 행 파싱 오류.

    Args:
        message (str): 오류 설명.
        row (Optional[int]): CSV 파일 기준 행 번호 (헤더가 1번째 행).
    """

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        prefix = f"{row}번째 행: " if row is not None else ""
        super().__init__(prefix + message)


class AudioIOError(AcrnnError, OSError):
    """파일을 읽거나 쓸 수 없는 경우."""

    exit_code = 3


class AudioFormatError(AudioIOError):
    """지원하지 않는 오디오 인코딩."""


class ManifestError(AudioIOError):
    """매니페스트가 존재하지 않는 오디오 파일을 참조하는 경우."""


class FeatureStoreError(AudioIOError):
    """특징 저장소/체크포인트 파일이 손상되었거나 형식이 맞지 않는 경우."""


class NumericError(AcrnnError, ArithmeticError):
    """순전파 연산 결과에 NaN/Inf가 포함된 경우."""

    exit_code = 4


class TrainingError(NumericError):
    """
    학습 중 수치 발산.

    Args:
        epoch (int): 발산이 감지된 에폭.
        batch (int): 발산이 감지된 배치 인덱스.
        detail (str): 원인 설명.
    """

    def __init__(self, epoch: int, batch: int, detail: str = ""):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"학습 발산 감지 (epoch={epoch}, batch={batch}): {detail}")


class FeatureExtractionError(AcrnnError):
    """
    특정 클립의 특징 추출 실패.

    Args:
        clip_path (str): 실패한 클립 경로.
        cause (Exception): 원인 예외.
    """

    exit_code = 3

    def __init__(self, clip_path: str, cause: Exception):
        self.clip_path = clip_path
        self.cause = cause
        super().__init__(f"특징 추출 실패: {clip_path} ({cause})")
