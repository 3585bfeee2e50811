from .codec import BYTE_ORDER, BinaryReader, BinaryWriter, Dtype, TruncatedDataError

__all__ = ["BYTE_ORDER", "BinaryReader", "BinaryWriter", "Dtype", "TruncatedDataError"]
