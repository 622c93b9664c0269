from hormander_spectral.cli import main


raise SystemExit(main())
