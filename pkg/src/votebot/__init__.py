"""votebot: a safe, auditable FAQ chatbot engine for official election information.

Every answer the bot gives is traceable verbatim to an entry of an official
question/answer corpus; everything else is deflected or met with a fallback
template, and every turn is written to a tamper-evident audit log.
"""

__version__ = "0.1.0"
