from typing import List, Optional

from fastapi import HTTPException, Query


def parse_comma_separated_floats(value: str) -> List[float]:
    """
        Parses a point given as comma-separated decimals, e.g. "0,0.5,0".

        :raises ValueError: on empty input or a component that is not a number
    """
    parts = [part.strip() for part in value.split(",")]
    if not value.strip() or any(not part for part in parts):
        raise ValueError("Malformed point '{}'".format(value))
    return [float(part) for part in parts]


def parse_point(value: str, dim: Optional[int] = None) -> List[float]:
    """Parses a point and cross-checks its dimension when `dim` is given."""
    coords = parse_comma_separated_floats(value)
    if dim is not None and len(coords) != dim:
        raise ValueError("Point '{}' has dimension {}, expected N={}".format(value, len(coords), dim))
    return coords


def point_query(param_name: str):
    def dependency(param_value: str = Query(alias=param_name)) -> List[float]:
        try:
            return parse_comma_separated_floats(param_value)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
    return dependency
