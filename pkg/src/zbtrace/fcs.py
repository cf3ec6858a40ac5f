"""IEEE 802.15.4 frame check sequence (ITU-T CRC-16, reflected, zero init)."""

_POLY_REFLECTED = 0x8408


def _make_table():
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = (crc >> 1) ^ _POLY_REFLECTED if crc & 1 else crc >> 1
        table.append(crc)
    return tuple(table)


_TABLE = _make_table()


def fcs16(data: bytes) -> int:
    """CRC over the MPDU without its trailing FCS bytes.

    The result is transmitted little-endian, so a well-formed frame ends with
    ``fcs16(body).to_bytes(2, "little")``.
    """
    crc = 0
    for b in data:
        crc = (crc >> 8) ^ _TABLE[(crc ^ b) & 0xFF]
    return crc


def fcs_bytes(data: bytes) -> bytes:
    return fcs16(data).to_bytes(2, "little")


def check_fcs(frame: bytes) -> bool:
    """True when the last two bytes of ``frame`` are a valid FCS for the rest."""
    if len(frame) < 2:
        return False
    return fcs16(frame[:-2]) == int.from_bytes(frame[-2:], "little")
