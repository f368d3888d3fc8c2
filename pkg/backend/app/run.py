from backend.app.main import run_app

if __name__ == "__main__":
    raise SystemExit(run_app())
