from typing import List

from fastapi import APIRouter, Depends, HTTPException, Query

from kernels import boggio_profile, green, psi
from models.errors import PolyharmonicError
from models.schemas import BallGeometry, KernelParams, KernelValue
from utils.api_utils import point_query

router = APIRouter(tags=["Kernels"], prefix="/kernels")


def kernel_params(
        m: int = Query(ge=1),
        N: int = Query(ge=1),
        q: float = Query(default=2.0, gt=1),
) -> KernelParams:
    return KernelParams(N=N, m=m, q=q)


def geometry(
        N: int = Query(ge=1),
        domain: str = Query(default="ball", pattern="^(ball|shifted-ball|half-space)$"),
        R: float = Query(default=1.0, gt=0),
) -> BallGeometry:
    if domain == "half-space":
        return BallGeometry.half_space(N)
    if domain == "shifted-ball":
        return BallGeometry.shifted_ball(R, N)
    return BallGeometry.ball(R, N)


@router.get(
    path="/green",
    response_model=KernelValue,
    summary="Green function value"
)
def read_green(
        params: KernelParams = Depends(kernel_params),
        geom: BallGeometry = Depends(geometry),
        x: List[float] = Depends(point_query("x")),
        y: List[float] = Depends(point_query("y")),
):
    """
        Evaluate the polyharmonic Green function of a ball, a shifted ball or the half-space.

        Parameters
        ----------
        `m`, `N`, `q`: `int`, `int`, `float`
            Kernel parameters; `q` only enters derived quantities.\n
        `domain`: `str`, `optional`
            One of `ball`, `shifted-ball`, `half-space` (default `ball`).\n
        `R`: `float`, `optional`
            Radius of the (shifted) ball (default 1).\n
        `x`, `y`: `List[float]`
            Comma-separated points, e.g. `x=0,0,0`.

        Returns
        -------
        `KernelValue`
            `G(x, y)` and the ψ-argument it was evaluated at.

        Raises
        ------
        `HTTPException`
            `422` for points of the wrong dimension, outside the domain or coincident.
    """
    try:
        return KernelValue(value=green(params, geom, x, y), psi=psi(params, geom, x, y))
    except PolyharmonicError as exc:
        raise HTTPException(status_code=422, detail=exc.message)


@router.get(
    path="/psi",
    response_model=KernelValue,
    summary="ψ-argument"
)
def read_psi(
        params: KernelParams = Depends(kernel_params),
        geom: BallGeometry = Depends(geometry),
        x: List[float] = Depends(point_query("x")),
        y: List[float] = Depends(point_query("y")),
):
    try:
        return KernelValue(value=psi(params, geom, x, y))
    except PolyharmonicError as exc:
        raise HTTPException(status_code=422, detail=exc.message)


@router.get(
    path="/profile",
    response_model=KernelValue,
    summary="Boggio profile"
)
def read_profile(
        params: KernelParams = Depends(kernel_params),
        t: float = Query(),
):
    """
        Boggio's profile `∫_0^t z^(m-1) (1+z)^(-N/2) dz`; `t=inf` is accepted when `N > 2m`.
    """
    try:
        return KernelValue(value=boggio_profile(t, params))
    except PolyharmonicError as exc:
        raise HTTPException(status_code=422, detail=exc.message)
