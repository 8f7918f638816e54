"""Exception hierarchy shared across the toolkit.

Every data- or domain-level failure derives from :class:`TopDogError` so the
command line layer can map it to a single exit code.  Usage errors (bad flag
values, unreadable files) are deliberately *not* part of this hierarchy.
"""


class TopDogError(Exception):
    """Base class for all domain errors raised by this package."""


# --- dataset ingestion ------------------------------------------------------

class MalformedRow(TopDogError):
    """A CSV row has the wrong column count or an unparseable value."""


class OversoldProduct(TopDogError):
    """Cumulative sales of a (branch, product) pair exceed its supply."""


class UnknownPair(TopDogError):
    """A transaction references a pair missing from the supply table."""


class DayBeyondHorizon(TopDogError):
    """A transaction day lies past the configured season horizon."""


# --- sampling ---------------------------------------------------------------

class EmptyUniverse(TopDogError):
    """The product universe to partition is empty."""


class NoSales(TopDogError):
    """No item of the sample was sold up to the requested day."""


class BranchSetMismatch(TopDogError):
    """Two demand estimates cover different branch sets."""


class ZeroSupply(TopDogError):
    """The sample has zero total supply, so supply shares are undefined."""


# --- index computation ------------------------------------------------------

class NonPositiveDampening(TopDogError):
    """The dampening constant of the index must be strictly positive."""


class TooFewBranches(TopDogError):
    """The statistic needs more branches than the input provides."""


# --- rebalancing ------------------------------------------------------------

class DegenerateTdis(TopDogError):
    """Too few distinct index values to derive cluster boundaries."""


class NegativeShare(TopDogError):
    """A cluster increment would drive a supply share below zero."""


class ZeroMass(TopDogError):
    """All adjusted shares vanish, leaving nothing to normalize."""
