"""Exception types raised across the toolkit."""


class ZbTraceError(Exception):
    """Base class; the CLI maps these to data-error exit codes."""

    code = "data-error"


class PcapError(ZbTraceError):
    code = "pcap-error"


class DecodeError(ZbTraceError):
    code = "decode-error"


class DeviceMapError(ZbTraceError):
    code = "device-map-error"


class WindowError(ZbTraceError):
    code = "invalid-window"


class ClassifierError(ZbTraceError):
    code = "classifier-error"


class StoreError(ZbTraceError):
    code = "store-error"


class ScenarioError(ZbTraceError):
    code = "invalid-scenario"
