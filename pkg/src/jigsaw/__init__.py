"""Jigsaw secure data transfer.

Messages are torn into parts of random size, each part is framed with two
sentinel bits, placed at a random offset in a block and masked with one
block of a pre-shared key. Every group of ``k-1`` masked parts is closed by
a masked random value R that both ends fold into the key before the next
group. Packets carry a sequence number and an HMAC tag.
"""

from .bitblock import (
    Block,
    first_set_bit,
    inverse_odd,
    last_set_bit,
    mul_mod,
    random_block,
    random_source,
    xor_block,
)
from .codec import (
    DecodeSession,
    EncodeSession,
    GroupCiphertext,
    decode_group,
    decode_message,
    encode_group,
    encode_message,
    feed_group,
    iter_encode_message,
)
from .errors import *  # noqa: F401,F403
from .framing import BitString, embed, extract, frame, random_offset
from .keystate import KeyState, generate, inverse_transform, load_key, save_key, transform
from .tearing import TearConfig, tear

__version__ = "0.1.0"
