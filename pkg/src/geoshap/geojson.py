"""GeoJSON export of explanation records and SVC surfaces.

Output is a FeatureCollection of Point features in (lon, lat) axis order.
Which geo column is longitude is inferred from column names when they are
recognizable; otherwise the first geo column is taken as the x/longitude
axis (override with lon_first=False). Masked values serialize as null plus a
mask-reason property; NaN never reaches the file.
"""

import json
import math

from .analytics import SvcSurface
from .records import ExplanationSet

_LON_NAMES = {"lon", "lng", "long", "longitude", "x", "easting", "u"}
_LAT_NAMES = {"lat", "latitude", "y", "northing", "v"}


def _axis_order(geo_names, lon_first=None):
    """Return (lon_idx, lat_idx) into the geo columns."""
    if len(geo_names) == 1:
        return 0, 0
    if lon_first is None:
        a, b = geo_names[0].lower(), geo_names[1].lower()
        if a in _LAT_NAMES and b in _LON_NAMES:
            return 1, 0
        lon_first = True
    return (0, 1) if lon_first else (1, 0)


def _clean(value):
    if value is None:
        return None
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {value} cannot be serialized")
    return value


def _point(location, lon_idx, lat_idx):
    coords = [_clean(location[lon_idx]), _clean(location[lat_idx])]
    return {"type": "Point", "coordinates": coords}


def _records_features(explset, lon_first):
    lon_idx, lat_idx = _axis_order(explset.schema.geo_names, lon_first)
    names = explset.scalar_names
    features = []
    for rec in explset.records:
        props = {
            "id": rec.id,
            "yhat": _clean(rec.yhat),
            "phi0": _clean(rec.phi0),
            "phi_geo": _clean(rec.phi_geo),
            "residual": _clean(rec.residual),
        }
        for name, v in zip(names, rec.phi):
            props[f"phi_{name}"] = _clean(v)
        for name, v in zip(names, rec.phi_geo_x):
            props[f"phi_geo_x_{name}"] = _clean(v)
        features.append({
            "type": "Feature",
            "geometry": _point(rec.location, lon_idx, lat_idx),
            "properties": props,
        })
    return features


def _surface_features(surface, lon_first):
    lon_idx, lat_idx = _axis_order(surface.geo_names, lon_first)
    ids = surface.ids or tuple(str(i) for i in range(len(surface.cells)))
    features = []
    for i, row in enumerate(surface.cells):
        props = {"id": ids[i], "intercept": _clean(surface.intercept[i])}
        for name, cell in zip(surface.feature_names, row):
            props[f"coef_{name}"] = None if cell.masked else _clean(cell.value)
            if cell.masked:
                props[f"coef_{name}_mask"] = cell.mask_reason
        features.append({
            "type": "Feature",
            "geometry": _point(surface.locations[i], lon_idx, lat_idx),
            "properties": props,
        })
    return features


def export_geojson(obj, path, lon_first=None, run_id=None):
    """Write an ExplanationSet or SvcSurface as a GeoJSON FeatureCollection."""
    if isinstance(obj, ExplanationSet):
        features = _records_features(obj, lon_first)
    elif isinstance(obj, SvcSurface):
        features = _surface_features(obj, lon_first)
    else:
        raise TypeError(f"cannot export {type(obj).__name__} as GeoJSON")
    collection = {"type": "FeatureCollection", "features": features}
    if run_id:
        collection["properties"] = {"run_id": run_id}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(collection, fh, indent=1, allow_nan=False)
        fh.write("\n")
    return path
