from hal_loss.cli import main

main()
