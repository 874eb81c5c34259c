from rmtlab.cli import main

raise SystemExit(main())
