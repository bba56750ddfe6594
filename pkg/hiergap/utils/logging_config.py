import logging
import logging.handlers
import sys
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict

import structlog
import colorlog
from structlog.stdlib import LoggerFactory


class RunFilter(logging.Filter):
    """Stamp every record with run metadata so file logs can be joined to reports"""

    def filter(self, record):
        record.run_timestamp = datetime.utcnow().isoformat()
        record.service = "hiergap"
        return True


class RationalProcessor:
    """Processor rendering exact rationals as "num/den" strings"""

    @staticmethod
    def render_rationals(logger: Any, method_name: str, event_dict: Dict[str, Any]) -> Dict[str, Any]:
        def render(value: Any) -> Any:
            if isinstance(value, Fraction):
                return f"{value.numerator}/{value.denominator}"
            if isinstance(value, (list, tuple)):
                return [render(v) for v in value]
            if isinstance(value, dict):
                return {str(k): render(v) for k, v in value.items()}
            return value

        for key in list(event_dict):
            event_dict[key] = render(event_dict[key])
        return event_dict


def setup_logging(log_level: str = "INFO", log_file_path: str = "logs/hiergap.log") -> None:
    """
    Set up logging for construction and certification runs

    Features:
    - Console logging with colors (stderr, stdout carries JSON results)
    - File logging with rotation
    - Structured logging with JSON format
    - Rational numbers rendered exactly
    - Certification trail in a separate log
    """

    log_dir = Path(log_file_path).parent
    log_dir.mkdir(parents=True, exist_ok=True)

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            RationalProcessor.render_rationals,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer()
        ],
        context_class=dict,
        logger_factory=LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, log_level.upper()))
    root_logger.handlers.clear()

    console_handler = colorlog.StreamHandler(sys.stderr)
    console_formatter = colorlog.ColoredFormatter(
        '%(log_color)s%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'red,bg_white',
        }
    )
    console_handler.setFormatter(console_formatter)
    console_handler.addFilter(RunFilter())

    file_handler = logging.handlers.RotatingFileHandler(
        log_file_path,
        maxBytes=10 * 1024 * 1024,  # 10MB
        backupCount=10,
        encoding='utf-8'
    )
    file_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(run_timestamp)s - %(service)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    file_handler.setFormatter(file_formatter)
    file_handler.addFilter(RunFilter())

    # Certification verdicts go to their own file
    certification_log_path = log_dir / "certification.log"
    certification_handler = logging.handlers.RotatingFileHandler(
        certification_log_path,
        maxBytes=50 * 1024 * 1024,
        backupCount=20,
        encoding='utf-8'
    )
    certification_formatter = logging.Formatter(
        '%(asctime)s - CERTIFY - %(run_timestamp)s - %(service)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    certification_handler.setFormatter(certification_formatter)
    certification_handler.addFilter(RunFilter())

    root_logger.addHandler(console_handler)
    root_logger.addHandler(file_handler)

    certification_logger = logging.getLogger('certification')
    certification_logger.handlers.clear()
    certification_logger.addHandler(certification_handler)
    certification_logger.setLevel(logging.INFO)
    certification_logger.propagate = False


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """Get a structured logger instance"""
    return structlog.get_logger(name)


def get_certification_logger() -> logging.Logger:
    """Get the logger recording certification verdicts"""
    return logging.getLogger('certification')


def log_certification_event(check: str, passed: bool, **details: Any) -> None:
    """Record the verdict of one certification check"""
    certification_logger = get_certification_logger()

    log_data = {
        'check': check,
        'passed': passed,
        'timestamp': datetime.utcnow().isoformat(),
        'details': RationalProcessor.render_rationals(None, "info", dict(details)),
    }

    status = "PASS" if passed else "FAIL"
    certification_logger.info(f"{status}: {check}", extra=log_data)


def log_construction_event(kind: str, **details: Any) -> None:
    """Log the outcome of building a fractional solution"""
    logger = get_logger("construction")

    logger.info(
        "Construction completed",
        kind=kind,
        **details
    )
