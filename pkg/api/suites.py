from fastapi import APIRouter, HTTPException, Body

from models.schemas import SuiteRequest, VerificationReport
from utils.reports import make_metadata
from verification import SUITES, run_suite

router = APIRouter(tags=["Suites"], prefix="/suites")


@router.post(
    path="/{suite}",
    response_model=VerificationReport,
    summary="Run verification suite"
)
def post_suite(suite: str, request: SuiteRequest = Body(...)):
    """
        Run one verification suite and return the same report the `verify` command writes.

        Parameters
        ----------
        `suite`: `str`
            Suite name, e.g. `conformal` or `kernels`.\n
        `request`: `SuiteRequest`
            Kernel parameters, optional quadrature settings, sample count and seed.

        Raises
        ------
        `HTTPException`
            If the suite does not exist (`404 Not Found`).
    """
    if suite not in SUITES:
        raise HTTPException(status_code=404, detail="Suite not found")
    report = run_suite(suite, request.params, request.quadrature, request.seed, request.samples)
    report.metadata = make_metadata(request.seed if request.seed is not None else 0, ["POST", "/suites/" + suite])
    return report
