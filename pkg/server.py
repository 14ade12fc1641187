import logging

from fastapi import FastAPI, Response

from api.conformal import router as conformal_router
from api.kernels import router as kernels_router
from api.suites import router as suites_router
from settings import get_settings

settings = get_settings()

logging.basicConfig(level=settings.LOG_LEVEL.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")

app = FastAPI(title="Polyharmonic Toolkit API")
app.include_router(kernels_router)
app.include_router(conformal_router)
app.include_router(suites_router)

@app.get("/", include_in_schema=False)
def root():
    """Health check"""
    return Response("Server is running.", status_code=200)
