"""
Logger module for the sbdc toolkit.
"""

import logging
import queue
import time

from utils.config import LOG_LEVELS, LOG_QUEUE_SIZE

# Register the domain tags so stdlib records print them by name
for _name, _level in LOG_LEVELS.items():
    if logging.getLevelName(_level) == f"Level {_level}":
        logging.addLevelName(_level, _name)


class Logger:
    """
    Logger class to handle pipeline logging with tagged levels.

    Every entry goes to the stdlib ``sbdc`` logger and is also kept in a
    bounded queue so a run can report what happened.
    """
    def __init__(self, log_queue=None, max_logs=LOG_QUEUE_SIZE, name="sbdc"):
        """Initialize the logger with a bounded queue of recent entries."""
        self.max_logs = max_logs
        self.log_queue = log_queue if log_queue is not None else queue.Queue(maxsize=max_logs)
        self.backend = logging.getLogger(name)

    def log(self, message, level="INFO"):
        """Log a message with specified level."""
        if level not in LOG_LEVELS:
            level = "INFO"
        self.backend.log(LOG_LEVELS[level], message)

        log_entry = {
            "timestamp": time.strftime("%H:%M:%S"),
            "message": message,
            "level": level,
        }
        if self.log_queue.full():
            try:
                self.log_queue.get_nowait()  # Remove oldest log
            except queue.Empty:
                pass
        try:
            self.log_queue.put_nowait(log_entry)
        except queue.Full:
            pass

    def entries(self, level=None):
        """Snapshot of the queued entries, optionally filtered by level."""
        with self.log_queue.mutex:
            items = list(self.log_queue.queue)
        if level is None:
            return items
        return [item for item in items if item["level"] == level]

    def clear(self):
        """Clear the log queue."""
        while not self.log_queue.empty():
            try:
                self.log_queue.get_nowait()
            except queue.Empty:
                break


# Create a global logger instance
logger = Logger()
