"""Exception hierarchy.

``DataError`` covers bad or missing inputs; ``PipelineError`` covers a stage
that ran on valid inputs but could not produce a result. The CLI maps them to
exit codes 2 and 3.
"""


class DaaSError(Exception):
    pass


class DataError(DaaSError):
    pass


class PipelineError(DaaSError):
    pass


class ParseError(DataError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class DuplicateStationError(DataError):
    pass


class DanglingEndpointError(DataError):
    def __init__(self, station_id, skyway_id=None):
        self.station_id = station_id
        where = f" (skyway {skyway_id})" if skyway_id is not None else ""
        super().__init__(f"skyway endpoint {station_id!r} is not a known station{where}")


class UnknownStationError(DataError, KeyError):
    def __init__(self, station_id):
        self.station_id = station_id
        DataError.__init__(self, f"unknown station {station_id!r}")

    def __str__(self):
        return self.args[0]


class MissingWeatherError(DataError):
    pass


class InfeasibleError(PipelineError):
    pass


class NoRouteError(PipelineError):
    pass
