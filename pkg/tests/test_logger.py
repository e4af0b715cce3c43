from __future__ import annotations

import logging

import pytest

from offloader.utils.logger import LOG_FORMAT, get_logger, setup_logging


@pytest.fixture
def root_logger():
    root = logging.getLogger()
    level = root.level
    yield root
    root.setLevel(level)


def test_existing_handlers_are_left_alone(root_logger, monkeypatch):
    handler = logging.NullHandler()
    monkeypatch.setattr(root_logger, "handlers", [handler])
    root_logger.setLevel(logging.WARNING)

    setup_logging(logging.DEBUG)

    assert root_logger.handlers == [handler]
    assert root_logger.level == logging.WARNING


def test_bare_root_gets_the_standard_format(root_logger, monkeypatch):
    monkeypatch.setattr(root_logger, "handlers", [])

    setup_logging(logging.DEBUG)

    assert root_logger.level == logging.DEBUG
    assert len(root_logger.handlers) == 1
    assert root_logger.handlers[0].formatter._fmt == LOG_FORMAT


def test_loggers_live_under_the_package_namespace():
    assert get_logger().name == "offloader"
    assert get_logger("offloader.mdp").name == "offloader.mdp"
    assert get_logger("AllCloudPolicy").name == "offloader.AllCloudPolicy"
