import pytest

from sliceshare.model import (Resource, SliceSpec, UserClass, Instance,
                              validate_instance)


def make_instance(resources, slices, classes):
    return validate_instance(Instance(
        tuple(Resource(*r) if isinstance(r, tuple) else Resource(r)
              for r in resources),
        tuple(SliceSpec(*s) for s in slices),
        tuple(UserClass(*c) for c in classes)))


@pytest.fixture
def three_user():
    """Worked example: user 1 on two links, users 2 and 3 share links and
    compute.  Known PF solution (0.4, 1/3, 2/3) for q=(.25,.25,.5)."""
    return make_instance(
        ["r1", "r2", "r3", "r4", "r5"],
        [("s1", 0.5), ("s2", 0.5)],
        [("u1", "s1", {"r1": 1.0, "r2": 1.0}),
         ("u2", "s1", {"r1": 0.6, "r4": 1.0, "r5": 1.0}),
         ("u3", "s2", {"r1": 0.6, "r4": 1.0, "r5": 1.0})])


@pytest.fixture
def single_resource():
    """One unit link, one class per slice, unit demands."""
    return make_instance(
        ["r1"],
        [("s1", 0.5), ("s2", 0.5)],
        [("c1", "s1", {"r1": 1.0}, 0.45),
         ("c2", "s2", {"r1": 1.0}, 0.45)])
