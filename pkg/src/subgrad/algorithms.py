"""Algorithm configurations: which randomized maximizer defines the set likelihood."""

from dataclasses import dataclass

from . import dgreedy, pgreedy
from .dgreedy import ItemOrder, LinkFunction
from .pgreedy import SetLikelihoodMode


@dataclass(frozen=True)
class DGreedyAlgo:
    link: LinkFunction
    order: ItemOrder | None = None

    name = "dgreedy"

    def order_for(self, n):
        if self.order is None:
            return ItemOrder.identity(n)
        return self.order

    def log_likelihood(self, f, X, rng=None):
        return dgreedy.log_likelihood(f, self.link, self.order_for(f.n), X)

    def to_dict(self):
        d = {"algo": self.name, "link": self.link.to_dict()}
        if self.order is not None:
            d["order"] = {"perm": list(self.order.perm), "provenance": self.order.provenance}
        return d


@dataclass(frozen=True)
class PGreedyAlgo:
    t: float
    mode: SetLikelihoodMode = SetLikelihoodMode()

    name = "pgreedy"

    def log_likelihood(self, f, X, rng=None):
        return pgreedy.log_prob_set(f, X, self.t, self.mode, rng)

    def to_dict(self):
        return {"algo": self.name, "t": self.t, "mode": self.mode.to_dict()}


def algo_from_dict(d):
    if d["algo"] == "dgreedy":
        order = d.get("order")
        if order is not None:
            order = ItemOrder(tuple(order["perm"]), order["provenance"])
        return DGreedyAlgo(LinkFunction.from_dict(d["link"]), order)
    if d["algo"] == "pgreedy":
        return PGreedyAlgo(d["t"], SetLikelihoodMode.from_dict(d["mode"]))
    raise ValueError(f"unknown algorithm {d['algo']!r}")
