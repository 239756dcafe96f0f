"""
Command decorators for error handling, logging, and exit codes.
"""
import functools
import time
import traceback
import uuid
from typing import Any, Callable

from logger_config import get_logger
from utils.exceptions import DiagnosticFailure, ImageReadError, WaveletError

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BAD_INPUT = 2


def cli_command(func: Callable[..., Any]) -> Callable[..., int]:
    """
    Decorator for command-line entry points.

    Provides:
    - A correlation ID per invocation for log tracking
    - Exit code mapping: 0 success, 1 diagnostic failure or unexpected error,
      2 bad input (invalid config, unreadable image, dimension errors)
    - Start/finish logging with wall-clock duration

    The wrapped function returns an int exit code (None means success).

    Args:
        func: The command function to decorate

    Returns:
        Decorated command returning an exit code
    """
    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> int:
        correlation_id = str(uuid.uuid4())
        started = time.perf_counter()

        logger.info(
            f'Command {func.__name__} invoked',
            extra={'correlation_id': correlation_id, 'command': func.__name__}
        )

        try:
            result = func(*args, **kwargs)
            code = EXIT_OK if result is None else int(result)
            logger.info(
                f'Command {func.__name__} finished with exit code {code} '
                f'in {time.perf_counter() - started:.2f}s',
                extra={'correlation_id': correlation_id}
            )
            return code

        except DiagnosticFailure as e:
            logger.warning(
                f'Command {func.__name__} check failed: {e.message}',
                extra={'correlation_id': correlation_id}
            )
            return EXIT_FAILURE

        except (ValueError, ImageReadError) as e:
            # Validation errors: bad config keys, unreadable files, wrong dimensions
            message = e.message if isinstance(e, WaveletError) else str(e)
            logger.error(
                f'Command {func.__name__} rejected its input: {message}',
                extra={'correlation_id': correlation_id}
            )
            return EXIT_BAD_INPUT

        except Exception as e:
            logger.error(
                f'Command {func.__name__} failed: {str(e)}',
                extra={
                    'correlation_id': correlation_id,
                    'traceback': traceback.format_exc()
                },
                exc_info=True
            )
            return EXIT_FAILURE

    return wrapper
