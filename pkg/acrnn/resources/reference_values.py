"""
공개된 복잡도 참고 수치 (단위: 백만)

분석 카운터의 결과와 함께 출력할 뿐, 일치 여부를 검증하지 않습니다.
"""

# ACRNN (어텐션 없음 / l10 어텐션)
ACRNN_REFERENCE = {
    "params_m": 3.81,
    "flops_m_without_attention": 9.17,
    "flops_m_with_attention": 9.18,
}

# log-mel 입력 2-conv / 3-dense CNN 기준 모델
BASELINE_CNN_REFERENCE = {
    "params_m": 31.53,
    "flops_m": 63.27,
}
