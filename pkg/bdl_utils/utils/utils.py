import sys
import logging


class Logger:
    """
    Tees everything written to a stream into a log file.

    Parameters
    ----------
    logfile : str
        Path of the log file. Output is appended.
    stream : file-like, Optional
        The stream that is copied, e.g. :code:`sys.stdout`. The default is :code:`sys.__stdout__`.
    quiet : bool, Optional
        If True, nothing is written to the stream; the log file still receives everything.

    Example
    -------
    >>> sys.stdout = Logger('train_bdl.log')
    """

    def __init__(self, logfile, stream=None, quiet=False):
        self.terminal = sys.__stdout__ if stream is None else stream
        self.quiet = quiet
        self.log = open(logfile, "a")

    def write(self, message):
        if not self.quiet:
            self.terminal.write(message)
        self.log.write(message)
        self.flush()

    def flush(self):
        if not self.quiet:
            self.terminal.flush()
        self.log.flush()

    def close(self):
        self.log.close()


def format_time(t):
    """
    Converts time in seconds to a more readable format.

    Parameters
    ----------
    t : float
        The time in seconds.

    Returns
    -------
    t_str : str
        A string in the format of "XX day XX hour(s) XX minute(s) XX second(s)".
    """
    hh_mm_ss = []
    days, t = divmod(t, 86400)
    hours, t = divmod(t, 3600)
    minutes, seconds = divmod(t, 60)
    for value, unit in ((days, 'day'), (hours, 'hour'), (minutes, 'minute')):
        if value:
            hh_mm_ss.append(f"{int(value)} {unit}{'s' if value > 1 else ''}")
    hh_mm_ss.append(f"{seconds:.1f} second(s)")
    return ' '.join(hh_mm_ss)


def setup_logging(quiet=False):
    """Routes library log records to the (possibly teed) standard output."""
    root = logging.getLogger('bdl_utils')
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter('%(message)s'))
    root.addHandler(handler)
    root.setLevel(logging.WARNING if quiet else logging.INFO)
    root.propagate = False
    return root


def teardown_logging():
    root = logging.getLogger('bdl_utils')
    for handler in list(root.handlers):
        root.removeHandler(handler)
    root.setLevel(logging.NOTSET)
    root.propagate = True
