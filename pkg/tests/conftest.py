import numpy as np
import pytest
import torch
from hypothesis import settings

from carbonlens.geogrid import AffineTransform, GeoGrid

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

torch.set_num_threads(1)

UTM18 = "EPSG:32618"


def utm_grid(values, x0=600000.0, y0=5090220.0, res=10.0, nodata=float("nan")):
    return GeoGrid(np.asarray(values, dtype=np.float32),
                   AffineTransform.from_origin(x0, y0, res, res), UTM18, nodata)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# state code -> (lat_min, lat_max, lon_min, lon_max, city count)
STATE_BOXES = {
    "AA": (30.0, 42.0, -112.0, -94.0, 300),
    "BB": (44.0, 46.0, -80.0, -77.0, 40),
    "CC": (33.0, 35.0, -86.0, -84.0, 35),
    "DD": (25.0, 27.0, -82.0, -80.0, 30),
    "EE": (46.0, 48.0, -122.0, -119.0, 30),
    "FF": (38.0, 39.0, -77.0, -76.0, 25),
    "GG": (60.0, 62.0, -150.0, -147.0, 20),
    "HH": (20.0, 21.0, -157.0, -155.0, 20),
}


def city_fixture(seed=0):
    """500 cities over eight rectangular states with log-normal populations."""
    from carbonlens.corpus import CityRecord

    rng = np.random.default_rng(seed)
    cities = []
    for state, (la0, la1, lo0, lo1, n) in STATE_BOXES.items():
        lat = rng.uniform(la0, la1, n)
        lon = rng.uniform(lo0, lo1, n)
        pop = rng.lognormal(9, 1.5, n).astype(int) + 1
        cities += [CityRecord(f"{state}-{k:03d}", state, float(a), float(o), int(p))
                   for k, (a, o, p) in enumerate(zip(lat, lon, pop))]
    return cities


def airport_fixture(seed=0):
    # airports in the big state and a few others; GG and HH get none
    rng = np.random.default_rng(seed + 1)
    pts = [(float(rng.uniform(30, 42)), float(rng.uniform(-112, -94))) for _ in range(8)]
    pts += [(45.0, -78.5), (34.0, -85.0), (26.0, -81.0), (47.0, -120.5), (38.5, -76.5)]
    return pts
