from .codecs import CodecDescriptor, codec_by_name, codec_by_payload_type, negotiate_codecs
from .frames import MediaFrame, PatternSource, StatsSink, ToneSource
from .rtp import RtpError, RtpPacket, RtcpSenderReport

__all__ = [
    "CodecDescriptor",
    "codec_by_name",
    "codec_by_payload_type",
    "negotiate_codecs",
    "MediaFrame",
    "PatternSource",
    "StatsSink",
    "ToneSource",
    "RtpError",
    "RtpPacket",
    "RtcpSenderReport",
]
