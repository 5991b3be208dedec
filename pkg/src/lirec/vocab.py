"""Static label vocabularies (the merged 101 interactions / 15 relationships).

Only the relationship list is fully known; interactions that have no
published name after merging are given positional placeholders.
"""

RELATIONSHIPS = (
    "stranger", "friend", "colleague", "lover", "enemy", "acquaintance",
    "ex-lover", "boss", "worker", "manager", "customer",
    "knows-by-reputation", "parent", "child", "sibling",
)

_NAMED_INTERACTIONS = (
    "talks to", "asks", "explains", "informs", "greets", "hugs", "kisses",
    "introduces", "runs with", "leaves", "reads", "consoles", "suggests",
    "confesses", "listens to", "ignores", "reassures", "wishes", "looks at",
    "walks with", "laughs at", "entertains", "proposes", "assists", "guides",
    "hits", "plays with", "embraces", "catches", "avoids", "pretends",
    "searches", "scolds", "mocks", "steals from", "complains to", "accuses",
    "yells at", "orders", "obeys", "shoots", "pulls weapon on", "commits crime with",
)

N_INTERACTIONS = 101


def default_interactions(n=N_INTERACTIONS):
    names = list(_NAMED_INTERACTIONS[:n])
    names += [f"interaction_{i:03d}" for i in range(len(names), n)]
    return names


def default_relationships(n=len(RELATIONSHIPS)):
    names = list(RELATIONSHIPS[:n])
    names += [f"relationship_{i:02d}" for i in range(len(names), n)]
    return names
