"""
공통 모듈 패키지
"""
