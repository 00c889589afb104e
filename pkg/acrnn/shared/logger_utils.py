"""상세 로깅 유틸리티"""

import logging
import json
import functools
import time
from datetime import datetime
from pathlib import Path
from typing import Any, Callable
import inspect

import numpy as np

from ..config import Config

# 로거 설정
logger = logging.getLogger("detailed_logger")
logger.setLevel(logging.INFO)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# 리스트가 이보다 길면 길이만 기록
_MAX_LOGGED_ITEMS = 8


def setup_logging(level: str = None) -> None:
    """
    콘솔 로깅 포맷과 레벨을 설정합니다.

    Args:
        level (Optional[str]): 로그 레벨 이름 (기본값: Config.LOG_LEVEL).
    """
    logging.basicConfig(
        level=getattr(logging, (level or Config.LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT
    )


def _summarize(value: Any) -> Any:
    """배열·대용량 컬렉션을 로그에 남길 수 있는 형태로 요약"""
    if isinstance(value, np.ndarray):
        return {"ndarray": list(value.shape), "dtype": str(value.dtype)}
    if isinstance(value, (list, tuple)):
        if len(value) > _MAX_LOGGED_ITEMS:
            return f"<{type(value).__name__} len={len(value)}>"
        return [_summarize(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _summarize(v) for k, v in value.items()}
    if hasattr(value, "summary") and callable(value.summary):
        return value.summary()
    if hasattr(value, "model_dump"):
        return _summarize(value.model_dump())
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    return str(value)


def _json_serializable(obj):
    """JSON 직렬화 보조 함수"""
    summarized = _summarize(obj)
    if summarized is obj:
        return str(obj)
    return summarized


def _resolve_run_id(inputs: dict) -> str:
    """로그 파일명에 사용할 실행 식별자 추출"""
    for key in ("run_id", "test_fold", "fold"):
        if inputs.get(key) is not None:
            return f"{key}{inputs[key]}" if key != "run_id" else str(inputs[key])
    return "session"


def log_execution(module_name: str, step_name: str):
    """
    함수 실행의 입력, 출력, 소요 시간을 JSON 파일로 로깅하는 데코레이터

    동기/비동기 함수를 모두 지원합니다. 로그 저장 실패는 파이프라인을 중단시키지 않습니다.

    Args:
        module_name (str): 모듈 이름 (예: features, train, eval).
        step_name (str): 단계 이름 (예: extract, train_fold).

    Returns:
        Callable: 데코레이터 함수.
    """
    def decorator(func: Callable):
        def _begin(args, kwargs):
            # 인자 캡처 (self 제외)
            bound_args = inspect.signature(func).bind(*args, **kwargs)
            bound_args.apply_defaults()
            inputs = {k: v for k, v in bound_args.arguments.items() if k != 'self'}
            log_entry = {
                "timestamp": datetime.now().strftime("%Y%m%d_%H%M%S"),
                "module": module_name,
                "step": step_name,
                "function": func.__name__,
                "inputs": _summarize(inputs),
                "status": "started"
            }
            return _resolve_run_id(inputs), log_entry

        def _finish(run_id, log_entry, start_time, result=None, error=None):
            log_entry["execution_time_ms"] = (time.time() - start_time) * 1000
            if error is None:
                log_entry.update({"status": "success", "outputs": _summarize(result)})
            else:
                log_entry.update({"status": "error", "error": str(error)})
            _save_log(run_id, log_entry)

        if inspect.iscoroutinefunction(func):
            @functools.wraps(func)
            async def async_wrapper(*args, **kwargs):
                start_time = time.time()
                run_id, log_entry = _begin(args, kwargs)
                try:
                    result = await func(*args, **kwargs)
                except Exception as e:
                    _finish(run_id, log_entry, start_time, error=e)
                    raise
                _finish(run_id, log_entry, start_time, result=result)
                return result
            return async_wrapper

        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.time()
            run_id, log_entry = _begin(args, kwargs)
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                _finish(run_id, log_entry, start_time, error=e)
                raise
            _finish(run_id, log_entry, start_time, result=result)
            return result
        return wrapper
    return decorator


def _save_log(run_id: str, entry: dict):
    """로그를 파일에 추가 (Append 모드)"""
    if not Config.EXECUTION_LOG_ENABLED:
        return
    try:
        log_dir = Path(Config.LOG_DIR)
        log_dir.mkdir(parents=True, exist_ok=True)

        # 실행 식별자 + 날짜별 파일
        date_str = datetime.now().strftime("%Y%m%d")
        filepath = log_dir / f"{run_id}_{date_str}.json"

        # 기존 로그 읽기
        logs = []
        if filepath.exists():
            with open(filepath, 'r', encoding='utf-8') as f:
                try:
                    logs = json.load(f)
                    if not isinstance(logs, list):
                        logs = [logs]
                except json.JSONDecodeError:
                    logs = []

        logs.append(entry)

        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(logs, f, indent=2, ensure_ascii=False, default=_json_serializable)

    except Exception as e:
        logger.warning(f"로그 저장 실패: {e}")
