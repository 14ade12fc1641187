from typing import List

from fastapi import APIRouter, Depends, HTTPException

from api.kernels import kernel_params
from conformal import ConformalMap
from models.errors import PolyharmonicError
from models.schemas import KernelParams, PointValue
from utils.api_utils import point_query

router = APIRouter(tags=["Conformal"], prefix="/conformal")


@router.get(
    path="/phi",
    response_model=PointValue,
    summary="Ball to half-space map"
)
def read_phi(
        params: KernelParams = Depends(kernel_params),
        y: List[float] = Depends(point_query("y")),
):
    """
        Image of `y` under φ(y) = 2(y + e_1)/|y + e_1|^2 - e_1.

        Raises
        ------
        `HTTPException`
            `422` when `y` has the wrong dimension or lies at the pole `-e_1`.
    """
    try:
        return PointValue(value=ConformalMap(params).phi(y).tolist())
    except PolyharmonicError as exc:
        raise HTTPException(status_code=422, detail=exc.message)
